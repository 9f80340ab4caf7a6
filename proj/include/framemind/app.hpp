// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset I/O and the gen / train / eval / ablate-bonus commands as library
// calls. The command-line front end only parses arguments and maps errors to
// exit codes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "framemind/config.hpp"
#include "framemind/drfs.hpp"
#include "framemind/grpo.hpp"
#include "framemind/hash.hpp"
#include "framemind/log.hpp"
#include "framemind/remote_judge.hpp"
#include "framemind/reward.hpp"
#include "framemind/rollout.hpp"
#include "framemind/toy_policy.hpp"
#include "framemind/toyworld.hpp"
#include "framemind/video.hpp"

namespace framemind {

/// Missing or unreadable inputs; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training produced no usable batch at all; maps to exit code 3.
struct DegenerateTrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int degenerate = 3;
} // namespace exit_code

// ---------------------------------------------------------------------------
// Dataset

inline nlohmann::json task_json(const toy::Task& t) {
    return {{"video_id", t.video_id}, {"kind", toy::task_kind_name(t.kind)}, {"question", t.question}, {"gold", t.gold}};
}

inline toy::Task task_from_json(const nlohmann::json& j) {
    toy::Task t;
    t.video_id = j.at("video_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "temporal")
        t.kind = toy::TaskKind::temporal;
    else if (kind == "spatial")
        t.kind = toy::TaskKind::spatial;
    else
        throw UsageError("unknown task kind \"" + kind + "\"");
    t.question = j.at("question").get<std::string>();
    t.gold = j.at("gold").get<std::string>();
    return t;
}

inline std::string question_id(const toy::Task& t) {
    return t.video_id + ":" + std::string(toy::task_kind_name(t.kind));
}

struct Dataset {
    std::map<std::string, VideoSource> videos;
    std::vector<toy::Task> tasks;

    const VideoSource& video(const std::string& id) const {
        auto it = videos.find(id);
        if (it == videos.end()) throw UsageError("dataset has no video " + id);
        return it->second;
    }
};

struct GenSummary {
    std::size_t videos = 0;
    std::size_t tasks = 0;
};

/// `count` videos under out/videos/<id>/ and 2*count records in out/tasks.jsonl.
inline GenSummary cmd_gen(std::size_t count, std::uint64_t seed, const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out / "videos", ec);
    if (ec) throw UsageError("cannot create " + (out / "videos").string() + ": " + ec.message());
    std::ofstream tasks(out / "tasks.jsonl", std::ios::binary | std::ios::trunc);
    if (!tasks) throw UsageError("cannot write " + (out / "tasks.jsonl").string());
    GenSummary s;
    for (std::size_t i = 0; i < count; ++i) {
        auto [video, source] = toy::gen_video(mix_seed(seed, i));
        try {
            write_video(out / "videos" / video.id, source);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        ++s.videos;
        for (const auto& t : toy::make_tasks(video)) {
            tasks << task_json(t).dump() << '\n';
            ++s.tasks;
        }
    }
    if (!tasks.flush()) throw UsageError("write to " + (out / "tasks.jsonl").string() + " failed");
    return s;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "tasks.jsonl");
    if (!in) throw UsageError("no task file at " + (dir / "tasks.jsonl").string());
    Dataset d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (protocol::trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw UsageError(fmt::format("tasks.jsonl line {} is not JSON", lineno));
        try {
            d.tasks.push_back(task_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(fmt::format("tasks.jsonl line {}: {}", lineno, e.what()));
        }
        const auto& id = d.tasks.back().video_id;
        if (!d.videos.count(id)) {
            const auto manifest = dir / "videos" / id / "manifest.json";
            try {
                d.videos.emplace(id, load_video(manifest));
            } catch (const std::exception& e) {
                throw UsageError(e.what());
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Training

inline std::unique_ptr<JudgeClient> make_judge(const RunConfig& cfg) {
    if (cfg.judge == JudgeMode::remote) return std::make_unique<RemoteJudgeClient>(cfg.judge_url);
    return std::make_unique<StubJudge>();
}

/// The G sampling configurations of one group: the ladder, or G copies of
/// rung ceil(G/2) when `fixed_config_group` is set.
inline std::vector<SamplingConfig> group_configs(const RunConfig& cfg) {
    auto ladder = build_ladder(cfg.ladder, cfg.group_size);
    if (!cfg.fixed_config_group) return ladder;
    const SamplingConfig mid = ladder[static_cast<std::size_t>((cfg.group_size + 1) / 2 - 1)];
    return std::vector<SamplingConfig>(ladder.size(), mid);
}

inline RolloutOptions rollout_options(const RunConfig& cfg) { return {cfg.max_turns, cfg.evidence_turns}; }

inline TrajectoryScorer make_scorer(const toy::Task& task, const RewardConfig& reward, const JudgeClient* judge) {
    return [task, reward, judge](const Trajectory& t) {
        return total_reward(t.reward_inputs(), task.gold, task.scoring(), reward, judge);
    };
}

struct TrainResult {
    std::vector<nlohmann::json> metrics;
    std::size_t void_steps = 0;
    std::vector<double> initial_parameters;
};

inline nlohmann::json checkpoint_json(const toy::ToyPolicy& policy, const RunConfig& cfg, std::size_t steps_done) {
    nlohmann::json j = policy.to_json();
    j["config"] = to_json(cfg);
    j["steps_done"] = steps_done;
    return j;
}

/// Algorithm loop: one (video, question) group per step, sampled with the
/// run seed. `on_step` (optional) sees each metrics record as it is made.
template <typename P>
    requires TrainablePolicy<P> && std::derived_from<P, Policy>
TrainResult train_policy(P& policy, const RunConfig& cfg, const Dataset& data,
                         const std::function<void(const nlohmann::json&, const GroupBatch&)>& on_step = {}) {
    if (data.tasks.empty() && cfg.steps > 0) throw UsageError("dataset has no tasks");
    TrainResult result;
    result.initial_parameters.assign(policy.parameters().begin(), policy.parameters().end());
    const PolicySnapshot ref(policy.parameters(), PolicySnapshot::Role::reference);
    const auto configs = group_configs(cfg);
    const auto judge = make_judge(cfg);
    const auto opts = rollout_options(cfg);
    const TrainConfig tc = cfg.train_config();

    for (int step = 0; step < cfg.steps; ++step) {
        const std::uint64_t step_seed = mix_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(step));
        const auto& task = data.tasks[mix_seed(step_seed, 0) % data.tasks.size()];
        std::vector<std::uint64_t> seeds;
        for (std::size_t g = 0; g < configs.size(); ++g) seeds.push_back(mix_seed(step_seed, 1 + g));
        GroupBatch batch = run_group(policy, data.video(task.video_id), question_id(task), task.question, configs,
                                     seeds, make_scorer(task, cfg.reward, judge.get()), opts);
        nlohmann::json rec;
        try {
            const UpdateStats s = update(policy, std::span<const GroupBatch>(&batch, 1), ref, tc);
            rec = metrics_record(static_cast<std::size_t>(step), s);
            rec["void"] = false;
        } catch (const BatchVoidError& e) {
            log::warning("step {}: {}", step, e.what());
            ++result.void_steps;
            rec = {{"step", step}, {"void", true}};
        }
        rec["question_id"] = batch.question_id;
        rec["dropped"] = batch.dropped;
        if (on_step) on_step(rec, batch);
        result.metrics.push_back(std::move(rec));
    }
    if (cfg.steps > 0 && result.void_steps == static_cast<std::size_t>(cfg.steps))
        throw DegenerateTrainingError(fmt::format("all {} training batches were void", cfg.steps));
    return result;
}

/// Trains a fresh toy policy and writes config.json, metrics.jsonl,
/// checkpoint.json and (if enabled) trajectories.jsonl into cfg.out_dir.
inline toy::ToyPolicy cmd_train(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.dataset.empty()) throw ConfigError("config has no dataset");
    if (cfg.out_dir.empty()) throw ConfigError("config has no out_dir");
    const Dataset data = load_dataset(cfg.dataset);
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw UsageError("cannot create " + cfg.out_dir + ": " + ec.message());
    const fs::path out(cfg.out_dir);
    {
        std::ofstream c(out / "config.json");
        if (!c) throw UsageError("cannot write into " + cfg.out_dir);
        c << to_json(cfg).dump(2) << '\n';
    }
    std::ofstream metrics(out / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream trajectories;
    if (cfg.trajectory_log_every > 0) trajectories.open(out / "trajectories.jsonl", std::ios::binary | std::ios::trunc);

    toy::ToyPolicy policy(cfg.seed, cfg.init_scale);
    log::info("training {} steps, G={}, {} tasks{}{}", cfg.steps, cfg.group_size, data.tasks.size(),
              cfg.reward.strict_gating ? ", strict gating" : "", cfg.fixed_config_group ? ", fixed rung" : "");
    std::size_t steps_done = 0;
    const auto result = train_policy(policy, cfg, data, [&](const nlohmann::json& rec, const GroupBatch& batch) {
        metrics << rec.dump() << '\n';
        const auto step = rec.at("step").get<std::size_t>();
        if (cfg.trajectory_log_every > 0 && step % static_cast<std::size_t>(cfg.trajectory_log_every) == 0)
            for (const auto& t : batch.trajectories) {
                auto r = trajectory_record(t, batch.question_id);
                r["step"] = step;
                trajectories << r.dump() << '\n';
            }
        ++steps_done;
        if (steps_done % 500 == 0) log::info("step {}/{}", steps_done, cfg.steps);
    });
    std::ofstream ck(out / "checkpoint.json");
    ck << checkpoint_json(policy, cfg, steps_done).dump(2) << '\n';
    if (!metrics || !ck) throw UsageError("failed writing run outputs to " + cfg.out_dir);
    return policy;
}

// ---------------------------------------------------------------------------
// Evaluation

struct KindStats {
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct EvalReport {
    std::size_t n = 0;
    std::size_t correct = 0;
    std::map<std::string, KindStats> per_kind{{"temporal", {}}, {"spatial", {}}};
    double mean_turns = 0.0;
    double frame_at_rate = 0.0;
    double video_clip_rate = 0.0;
    double both_tools_rate = 0.0;
    double format_valid_rate = 0.0;
    int rung = 1;

    double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [k, s] : r.per_kind) per[k] = {{"n", s.n}, {"accuracy", s.accuracy()}};
    return {{"n", r.n},
            {"rung", r.rung},
            {"accuracy", r.accuracy()},
            {"per_kind", per},
            {"mean_turns", r.mean_turns},
            {"tool_usage", {{"FrameAt", r.frame_at_rate}, {"VideoClip", r.video_clip_rate}, {"both", r.both_tools_rate}}},
            {"format_valid_rate", r.format_valid_rate}};
}

/// One rollout per task at the given sampling configuration.
inline EvalReport evaluate(Policy& policy, const Dataset& data, const SamplingConfig& config,
                           const RolloutOptions& opts = {}, std::uint64_t seed = 0) {
    EvalReport r;
    r.rung = config.rung;
    for (std::size_t i = 0; i < data.tasks.size(); ++i) {
        const auto& task = data.tasks[i];
        const Trajectory t = run_rollout(policy, data.video(task.video_id), task.question, config, mix_seed(seed, i), opts);
        const int acc = t.final_answer ? score_accuracy(*t.final_answer, task.gold, task.scoring()) : 0;
        const auto tools = t.successful_tools();
        const bool fa = std::find(tools.begin(), tools.end(), ToolKind::FrameAt) != tools.end();
        const bool vc = std::find(tools.begin(), tools.end(), ToolKind::VideoClip) != tools.end();
        ++r.n;
        r.correct += static_cast<std::size_t>(acc);
        auto& k = r.per_kind[std::string(toy::task_kind_name(task.kind))];
        ++k.n;
        k.correct += static_cast<std::size_t>(acc);
        r.mean_turns += static_cast<double>(t.turns.size());
        r.frame_at_rate += fa ? 1.0 : 0.0;
        r.video_clip_rate += vc ? 1.0 : 0.0;
        r.both_tools_rate += (fa && vc) ? 1.0 : 0.0;
        r.format_valid_rate += protocol::check_format(t.response()).valid ? 1.0 : 0.0;
    }
    if (r.n) {
        const double inv = 1.0 / static_cast<double>(r.n);
        for (double* v : {&r.mean_turns, &r.frame_at_rate, &r.video_clip_rate, &r.both_tools_rate, &r.format_valid_rate})
            *v *= inv;
    }
    return r;
}

struct Checkpoint {
    toy::ToyPolicy policy;
    RunConfig config;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open checkpoint " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw UsageError("checkpoint " + path.string() + " is not valid JSON");
    try {
        return {toy::ToyPolicy::from_json(j), j.contains("config") ? config_from_json(j["config"]) : RunConfig{}};
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("bad checkpoint " + path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError("bad checkpoint " + path.string() + ": " + e.what());
    }
}

/// Greedy evaluation of a trained policy; `rung` overrides the checkpoint's eval rung.
inline EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                           std::optional<int> rung = std::nullopt) {
    Checkpoint ck = load_checkpoint(checkpoint);
    const Dataset data = load_dataset(dataset);
    const int g = rung.value_or(ck.config.eval_rung);
    const auto ladder = build_ladder(ck.config.ladder, ck.config.group_size);
    if (g < 1 || g > static_cast<int>(ladder.size()))
        throw UsageError(fmt::format("rung {} is outside the ladder [1, {}]", g, ladder.size()));
    ck.policy.set_greedy(true);
    return evaluate(ck.policy, data, ladder[static_cast<std::size_t>(g - 1)], rollout_options(ck.config));
}

// ---------------------------------------------------------------------------
// Exploration-bonus ablation

struct AblationResult {
    EvalReport bonus;
    EvalReport strict;
};

/// Same config and seed twice: with the 0.2 exploration share, and with
/// strict gating. Runs land in <out_dir>/bonus and <out_dir>/strict.
inline AblationResult cmd_ablate_bonus(const RunConfig& base) {
    if (base.out_dir.empty()) throw ConfigError("config has no out_dir");
    const std::filesystem::path root(base.out_dir);
    const std::string eval_dir = base.eval_dataset.empty() ? base.dataset : base.eval_dataset;
    AblationResult res;
    for (bool strict : {false, true}) {
        RunConfig cfg = base;
        cfg.reward.strict_gating = strict;
        cfg.out_dir = (root / (strict ? "strict" : "bonus")).string();
        toy::ToyPolicy policy = cmd_train(cfg);
        policy.set_greedy(true);
        const Dataset data = load_dataset(eval_dir);
        const auto ladder = build_ladder(cfg.ladder, cfg.group_size);
        (strict ? res.strict : res.bonus) =
            evaluate(policy, data, ladder[static_cast<std::size_t>(cfg.eval_rung - 1)], rollout_options(cfg));
    }
    nlohmann::json summary{{"bonus", to_json(res.bonus)},
                           {"strict", to_json(res.strict)},
                           {"accuracy_gap", res.bonus.accuracy() - res.strict.accuracy()}};
    std::ofstream out(root / "ablation.json");
    out << summary.dump(2) << '\n';
    return res;
}

} // namespace framemind
