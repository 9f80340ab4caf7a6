// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance <work_dir>
// Exit status is the number of failed criteria (capped at 100).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include <fmt/format.h>

#include "framemind/app.hpp"
#include "grammar_oracle.hpp"
#include "support.hpp"

using namespace framemind;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr int kGrammarCases = 10'000;
constexpr double kGrammarSeconds = 10.0;
constexpr int kLadderCases = 1'000;
constexpr int kRewardCases = 10'000;
constexpr int kAdvantageGroups = 10'000;
constexpr double kZeroSumPerMember = 1e-9;
constexpr int kGradPolicies = 100;
constexpr double kFdStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr int kKlPairs = 10'000;
constexpr double kKlSpotTol = 1e-6;
constexpr int kToolCases = 1'000;
constexpr int kTrainSteps = 2'000;
constexpr double kMinBonusAccuracy = 0.85;
constexpr double kMinBothTools = 0.9;
constexpr double kMinStrictGap = 0.2;
constexpr double kTrainMinutes = 15.0;
constexpr std::size_t kTrainVideos = 50;
constexpr std::size_t kEvalVideos = 100;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -------------------------------------------------------------------------
void grammar() {
    const auto t0 = std::chrono::steady_clock::now();
    oracle::Corpus corpus(20240601);
    int agree = 0;
    for (int i = 0; i < kGrammarCases; ++i) {
        const std::string s = corpus.next();
        const auto [blocks, malformed] = oracle::turn(s);
        const auto t = protocol::parse_turn(s);
        bool ok = protocol::check_format(s).valid == oracle::format_valid(s) && t.malformed == malformed &&
                  t.blocks.size() == blocks.size() && protocol::count_turn_sums(s) == oracle::closed_turn_sums(s);
        for (std::size_t b = 0; ok && b < blocks.size(); ++b)
            ok = static_cast<int>(t.blocks[b].kind) == blocks[b].kind && t.blocks[b].content == blocks[b].content &&
                 t.blocks[b].span.start == blocks[b].start && t.blocks[b].span.end == blocks[b].end;
        agree += ok ? 1 : 0;
    }
    const double secs = seconds_since(t0);
    report(1, "grammar oracle agreement", agree == kGrammarCases && secs < kGrammarSeconds,
           fmt::format("{}/{} agree, {:.2f}s (limit {}s)", agree, kGrammarCases, secs, kGrammarSeconds));
}

// 2 -------------------------------------------------------------------------
void ladder() {
    const auto l = build_ladder({}, 8);
    bool ok = l[0].shape() == SamplingShape{64, 224, 224} && l[7].shape() == SamplingShape{32, 448, 448} &&
              l[3].shape() == SamplingShape{50, 320, 320};
    const bool examples = ok;
    std::mt19937_64 rng(2);
    auto uni = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
    int violations = 0;
    for (int i = 0; i < kLadderCases; ++i) {
        LadderEndpoints e;
        e.high.frames = uni(1, 64);
        e.low.frames = uni(e.high.frames, 128);
        e.low.height = uni(1, 448);
        e.high.height = uni(e.low.height, 1024);
        e.low.width = uni(1, 448);
        e.high.width = uni(e.low.width, 1024);
        const auto lad = build_ladder(e, uni(2, 16));
        bool good = lad.front().shape() == e.low && lad.back().shape() == e.high;
        for (std::size_t g = 1; g < lad.size(); ++g)
            good = good && lad[g].frames <= lad[g - 1].frames && lad[g].height >= lad[g - 1].height &&
                   lad[g].width >= lad[g - 1].width && lad[g].frames >= 1;
        violations += good ? 0 : 1;
    }
    report(2, "ladder exactness", examples && violations == 0,
           fmt::format("rung1/4/8 {}; {} of {} random ladders violate endpoints/monotonicity",
                       examples ? "match" : "MISMATCH", violations, kLadderCases));
}

// 3 -------------------------------------------------------------------------
void reward_algebra() {
    const std::string three = "<think>1</think><tool_call>c</tool_call><turn_sum>s</turn_sum>\n"
                              "<think>2</think><tool_call>c</tool_call><turn_sum>s</turn_sum>\n"
                              "<think>3</think><answer>A</answer>";
    const AnswerScoring em{};
    const double a = total_reward({"q", "A", three, {ToolKind::VideoClip, ToolKind::FrameAt}}, "a", em).total;
    const double b = total_reward({"q", "B", "<think>a<answer>B</answer>", {ToolKind::FrameAt}}, "a", em).total;
    const double c = total_reward({"q", "B", "<think>a</think><answer>B</answer>", {}}, "a", em).total;
    // 2.7 and -0.8 are not dyadic; "exactly" means the nearest double of the literal sum.
    const bool table = a == 1.0 + 0.0 + 1.2 + 0.5 && b == 0.0 - 1.0 + 0.2 && c == 0.0;

    oracle::Corpus corpus(33);
    std::mt19937_64 rng(33);
    const ToolKind kinds[] = {ToolKind::FrameAt, ToolKind::VideoClip};
    int out_of_range = 0;
    for (int i = 0; i < kRewardCases; ++i) {
        RewardInputs in{"q", rng() % 5 ? std::optional<std::string>(rng() % 2 ? "a" : "b") : std::nullopt,
                        corpus.next(), {}};
        for (int k = static_cast<int>(rng() % 5); k > 0; --k) in.successful_tools.push_back(kinds[rng() % 2]);
        RewardConfig cfg;
        cfg.strict_gating = rng() % 2;
        const double t = total_reward(in, "a", em, cfg).total;
        out_of_range += (t < -1.0 || t > 2.7 + 1e-12) ? 1 : 0;
    }
    report(3, "reward algebra", table && out_of_range == 0,
           fmt::format("table ({:.17g}, {:.17g}, {:.17g}) {}; {} of {} random totals outside [-1, 2.7]", a, b, c,
                       table ? "exact" : "WRONG", out_of_range, kRewardCases));
}

// 4 -------------------------------------------------------------------------
void advantage_zero_sum() {
    std::mt19937_64 rng(4);
    int sum_violations = 0;
    double worst = 0.0;
    for (int i = 0; i < kAdvantageGroups; ++i) {
        const std::size_t G = 2 + rng() % 15;
        std::vector<double> r(G);
        for (double& x : r) x = std::uniform_real_distribution<double>(-1.0, 2.7)(rng);
        double s = 0.0;
        for (double v : group_advantages(r).values) s += v;
        worst = std::max(worst, std::abs(s) / static_cast<double>(G));
        sum_violations += std::abs(s) <= kZeroSumPerMember * static_cast<double>(G) ? 0 : 1;
    }
    // Shift invariance, bit for bit: rewards on a 1/64 grid with power-of-two
    // groups keep every sum and mean exactly representable.
    int shift_violations = 0;
    for (int i = 0; i < kAdvantageGroups; ++i) {
        const std::size_t G = std::size_t{2} << (rng() % 4);
        std::vector<double> r(G), shifted(G);
        const double c = static_cast<double>(static_cast<int>(rng() % 641) - 320) / 64.0;
        for (std::size_t g = 0; g < G; ++g) {
            r[g] = static_cast<double>(static_cast<int>(rng() % 241) - 64) / 64.0;
            shifted[g] = r[g] + c;
        }
        shift_violations += group_advantages(r).values == group_advantages(shifted).values ? 0 : 1;
    }
    report(4, "advantage zero-sum", sum_violations == 0 && shift_violations == 0,
           fmt::format("{} sum violations (worst |sum|/G {:.2e}), {} shift-invariance mismatches over {} groups each",
                       sum_violations, worst, shift_violations, kAdvantageGroups));
}

// 5 -------------------------------------------------------------------------
void gradient_check() {
    const auto ladder = build_ladder({}, 4);
    double worst = 0.0;
    std::size_t params_checked = 0;
    for (int k = 0; k < kGradPolicies; ++k) {
        const auto seed = static_cast<std::uint64_t>(k);
        toy::ToyPolicy policy(seed, 1.0);
        const auto [video, src] = toy::gen_video(1000 + seed);
        const auto task = toy::make_tasks(video)[seed % 2];
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::vector<double> rewards(ladder.size());
        for (double& r : rewards) r = nd(rng);
        std::vector<std::uint64_t> seeds;
        for (std::size_t g = 0; g < ladder.size(); ++g) seeds.push_back(mix_seed(seed, g));
        const std::vector<GroupBatch> batches = {run_group(policy, src, "q", task.question, ladder, seeds,
                                                           [&](const Trajectory& t) {
                                                               RewardBreakdown b;
                                                               b.total = rewards[static_cast<std::size_t>(t.config.rung - 1)];
                                                               return b;
                                                           })};
        std::vector<double> theta(policy.parameters().begin(), policy.parameters().end()), old = theta, ref = theta;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            old[i] += 0.1 * nd(rng);
            ref[i] += 0.3 * nd(rng);
        }
        const PolicySnapshot old_s(old, PolicySnapshot::Role::old), ref_s(ref, PolicySnapshot::Role::reference);
        TrainConfig cfg;
        cfg.kl_coef = 0.1;
        const auto terms = collect_terms(batches, policy, old_s, ref_s);
        const auto analytic = evaluate_surrogate(terms, theta, cfg.clip_epsilon, cfg.kl_coef).gradient;
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            auto up = theta, dn = theta;
            up[i] += kFdStep;
            dn[i] -= kFdStep;
            policy.set_parameters(up);
            const double fu = surrogate_objective(batches, policy, old_s, ref_s, cfg);
            policy.set_parameters(dn);
            const double fdn = surrogate_objective(batches, policy, old_s, ref_s, cfg);
            const double fd = (fu - fdn) / (2 * kFdStep);
            err = std::max(err, std::abs(analytic[i] - fd));
            scale = std::max(scale, std::abs(fd));
            ++params_checked;
        }
        policy.set_parameters(theta);
        worst = std::max(worst, err / std::max(scale, 1e-8));
    }
    report(5, "surrogate gradient check", worst <= kGradRelTol,
           fmt::format("max ||g - fd||_inf / ||fd||_inf = {:.2e} over {} policies ({} partials, h = {:g}, tol {:g})",
                       worst, kGradPolicies, params_checked, kFdStep, kGradRelTol));
}

// 6 -------------------------------------------------------------------------
void kl_estimator() {
    std::mt19937_64 rng(6);
    int negative = 0, iff_violations = 0;
    for (int i = 0; i < kKlPairs; ++i) {
        const double a = -std::uniform_real_distribution<double>(0.0, 12.0)(rng);
        const double b = (i % 10 == 0) ? a : -std::uniform_real_distribution<double>(0.0, 12.0)(rng);
        const double kl = kl_low_var(a, b);
        negative += kl < 0.0 ? 1 : 0;
        iff_violations += ((kl == 0.0) != (a == b)) ? 1 : 0;
    }
    const double spot = kl_low_var(0.0, std::log(2.0));
    const double closed = 1.0 - std::log(2.0); // rho - ln rho - 1 at rho = 2
    const double spot2 = kl_low_var(0.0, std::log(0.5));
    const double closed2 = std::log(2.0) - 0.5;
    const bool spots = std::abs(spot - closed) <= kKlSpotTol && std::abs(spot2 - closed2) <= kKlSpotTol &&
                       std::round(spot * 1e4) / 1e4 == 0.3069;
    report(6, "KL estimator", negative == 0 && iff_violations == 0 && spots,
           fmt::format("{} negative, {} zero-iff-equal violations over {} pairs; KL(ln 2) = {:.7f} (closed form "
                       "{:.7f}), KL(-ln 2) = {:.7f}",
                       negative, iff_violations, kKlPairs, spot, closed, spot2));
}

// 7 -------------------------------------------------------------------------
void tool_semantics() {
    std::mt19937_64 rng(7);
    const double rates[] = {0.5, 1.0, 2.0, 3.0, 24.0, 29.97};
    int wrong = 0, bad_errors = 0, bad_counts = 0;
    for (int i = 0; i < kToolCases; ++i) {
        const double d = std::round(std::uniform_real_distribution<double>(2.0, 120.0)(rng));
        const auto s = testing_support::index_source(d, rates[rng() % 6], 1, 1);
        const double t = std::uniform_real_distribution<double>(-5.0, d + 5.0)(rng);
        const auto r = frame_at(s, t);
        if (t < 0 || t > d) {
            bad_errors += r.error == fmt::format("ERROR: Invalid timestamp. Video duration is {}s.", d) ? 0 : 1;
        } else {
            std::size_t best = 0;
            for (std::size_t k = 1; k < s.frame_count(); ++k)
                if (std::abs(s.frame_timestamp(k) - t) < std::abs(s.frame_timestamp(best) - t)) best = k;
            wrong += (r.ok() && r.frames[0].frame.index == best) ? 0 : 1;
        }
        double a = std::uniform_real_distribution<double>(0.0, d)(rng), b = std::uniform_real_distribution<double>(0.0, d)(rng);
        if (a > b) std::swap(a, b);
        if (a < b) {
            const auto c = video_clip(s, a, b);
            bad_counts += (c.ok() && c.frames.size() >= 8 && c.frames.size() <= 20) ? 0 : 1;
        }
    }
    report(7, "tool semantics", wrong == 0 && bad_errors == 0 && bad_counts == 0,
           fmt::format("{} nearest-frame mismatches, {} error-string mismatches, {} clip counts outside [8, 20] over "
                       "{} cases",
                       wrong, bad_errors, bad_counts, kToolCases));
}

// 8-10 ----------------------------------------------------------------------
RunConfig train_config(const fs::path& work, const std::string& name, std::uint64_t seed) {
    RunConfig cfg;
    cfg.steps = kTrainSteps;
    cfg.seed = seed;
    cfg.dataset = (work / "train").string();
    cfg.eval_dataset = (work / "eval").string();
    cfg.out_dir = (work / name).string();
    cfg.trajectory_log_every = 0;
    return cfg;
}

EvalReport eval_at(toy::ToyPolicy policy, const Dataset& data, const RunConfig& cfg, int rung) {
    policy.set_greedy(true);
    return evaluate(policy, data, build_ladder(cfg.ladder, cfg.group_size)[static_cast<std::size_t>(rung - 1)],
                    rollout_options(cfg));
}

/// Mixed-task accuracy averaged over every rung of the ladder.
double eval_all_rungs(const toy::ToyPolicy& policy, const Dataset& data, const RunConfig& cfg) {
    double sum = 0.0;
    for (int g = 1; g <= cfg.group_size; ++g) sum += eval_at(policy, data, cfg, g).accuracy();
    return sum / cfg.group_size;
}

void learning(const fs::path& work, const Dataset& eval) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig base = train_config(work, "ablate", 1);
    const auto res = cmd_ablate_bonus(base);
    const double minutes = seconds_since(t0) / 60.0;
    const double gap = res.bonus.accuracy() - res.strict.accuracy();
    const bool pass = res.bonus.accuracy() >= kMinBonusAccuracy && res.bonus.both_tools_rate >= kMinBothTools &&
                      gap >= kMinStrictGap && minutes < kTrainMinutes;
    (void)eval;
    report(8, "exploration bonus learning", pass,
           fmt::format("bonus acc {:.3f} (>= {}), both-tools {:.3f} (>= {}); strict acc {:.3f}, gap {:.3f} (>= {}); "
                       "{} steps x2 in {:.1f} min",
                       res.bonus.accuracy(), kMinBonusAccuracy, res.bonus.both_tools_rate, kMinBothTools,
                       res.strict.accuracy(), gap, kMinStrictGap, kTrainSteps, minutes));
}

void ladder_vs_fixed(const fs::path& work, const Dataset& eval) {
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        RunConfig ladder_cfg = train_config(work, fmt::format("ladder_s{}", seed), seed);
        RunConfig fixed_cfg = train_config(work, fmt::format("fixed_s{}", seed), seed);
        fixed_cfg.fixed_config_group = true;
        const double a = eval_all_rungs(cmd_train(ladder_cfg), eval, ladder_cfg);
        const double b = eval_all_rungs(cmd_train(fixed_cfg), eval, fixed_cfg);
        wins += a > b ? 1 : 0;
        detail += fmt::format("seed {}: ladder {:.4f} vs fixed {:.4f}; ", seed, a, b);
    }
    report(9, "ladder beats fixed rung", wins == 3, detail + fmt::format("ladder wins {}/3", wins));
}

void replay(const fs::path& work) {
    RunConfig cfg = train_config(work, "replay", 1);
    cmd_train(cfg);
    const std::string again = testing_support::slurp(fs::path(cfg.out_dir) / "metrics.jsonl");
    const std::string first = testing_support::slurp(work / "ablate" / "bonus" / "metrics.jsonl");
    report(10, "replay determinism", !first.empty() && first == again,
           fmt::format("metrics.jsonl {} bytes vs {} bytes, {}", first.size(), again.size(),
                       first == again ? "identical" : "DIFFERENT"));
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <work_dir>\n");
        return 2;
    }
    log::set_level(log::Level::error);
    const fs::path work = fs::absolute(argv[1]);
    fs::remove_all(work);
    fs::create_directories(work);

    grammar();
    ladder();
    reward_algebra();
    advantage_zero_sum();
    gradient_check();
    kl_estimator();
    tool_semantics();

    cmd_gen(kTrainVideos, 1, work / "train");
    cmd_gen(kEvalVideos, 2, work / "eval");
    const Dataset eval = load_dataset(work / "eval");
    learning(work, eval);
    ladder_vs_fixed(work, eval);
    replay(work);

    std::printf("%d of 10 criteria failed\n", failures);
    return std::min(failures, 100);
}
