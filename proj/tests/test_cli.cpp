// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "framemind/app.hpp"
#include "support.hpp"

using namespace framemind;
using testing_support::slurp;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FRAMEMIND_CLI) + " -q " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::size_t lines_in(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) n += !l.empty();
    return n;
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

nlohmann::json small_config(int steps, std::uint64_t seed = 1) {
    return {{"dataset", "data"}, {"out_dir", "run"}, {"steps", steps}, {"seed", seed}, {"trajectory_log_every", 10}};
}

/// Never finishes a rollout, so every group is void.
class DeadPolicy final : public Policy {
public:
    std::string act(const std::string&, const EvidenceWindow&, std::uint64_t) override {
        throw PolicyTransportError("no backend");
    }
    std::vector<DecisionLogProb> log_prob(const std::string&, const EvidenceWindow&, const std::string&) const override {
        return {};
    }
    std::span<const double> parameters() const { return theta_; }
    void set_parameters(std::span<const double> t) { theta_.assign(t.begin(), t.end()); }
    std::vector<Decision> decisions(const std::string&, const EvidenceWindow&, const std::string&) const { return {}; }

private:
    std::vector<double> theta_{0.0};
};

} // namespace

TEST(Gen, CountContract) {
    TempDir d("gen");
    ASSERT_EQ(run_cli("gen --count 10 --seed 3 --out " + d.path().string()), 0);
    std::size_t manifests = 0;
    for (const auto& e : fs::directory_iterator(d / "videos")) manifests += fs::exists(e.path() / "manifest.json");
    EXPECT_EQ(manifests, 10u);
    EXPECT_EQ(lines_in(d / "tasks.jsonl"), 20u);
    const auto data = load_dataset(d.path());
    EXPECT_EQ(data.tasks.size(), 20u);
    EXPECT_EQ(data.videos.size(), 10u);
}

TEST(Gen, SameSeedSameBytes) {
    TempDir a("gen_a"), b("gen_b");
    ASSERT_EQ(run_cli("gen --count 4 --seed 9 --out " + a.path().string()), 0);
    ASSERT_EQ(run_cli("gen --count 4 --seed 9 --out " + b.path().string()), 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a.path())) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a.path());
        ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
        EXPECT_EQ(fnv1a64(slurp(e.path())), fnv1a64(slurp(b.path() / rel))) << rel;
        ++files;
    }
    EXPECT_GT(files, 4u);
}

TEST(Gen, ZeroCountWritesEmptyTaskFile) {
    TempDir d("gen0");
    ASSERT_EQ(run_cli("gen --count 0 --seed 1 --out " + d.path().string()), 0);
    ASSERT_TRUE(fs::exists(d / "tasks.jsonl"));
    EXPECT_EQ(fs::file_size(d / "tasks.jsonl"), 0u);
}

TEST(Gen, UnwritablePathIsUsageError) {
    TempDir d("genbad");
    std::ofstream(d / "plain") << "x";
    EXPECT_EQ(run_cli("gen --count 2 --seed 1 --out " + (d / "plain" / "sub").string()), 2);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("gen --count 2"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Train, BadConfigsExitTwo) {
    TempDir d("badcfg");
    EXPECT_EQ(run_cli("train --config " + (d / "missing.json").string()), 2);
    std::ofstream(d / "broken.json") << "{not json";
    EXPECT_EQ(run_cli("train --config " + (d / "broken.json").string()), 2);
    auto unknown = small_config(1);
    unknown["lernig_rate"] = 0.1;
    write_json(d / "unknown.json", unknown);
    EXPECT_EQ(run_cli("train --config " + (d / "unknown.json").string()), 2);
    auto tiny = small_config(1);
    tiny["group_size"] = 1;
    write_json(d / "tiny.json", tiny);
    EXPECT_EQ(run_cli("train --config " + (d / "tiny.json").string()), 2);
    auto typed = small_config(1);
    typed["steps"] = "many";
    write_json(d / "typed.json", typed);
    EXPECT_EQ(run_cli("train --config " + (d / "typed.json").string()), 2);
    // Valid config, missing dataset.
    write_json(d / "nodata.json", small_config(1));
    EXPECT_EQ(run_cli("train --config " + (d / "nodata.json").string()), 2);
}

TEST(Config, RoundTripAndDefaults) {
    const RunConfig def;
    EXPECT_EQ(def.group_size, 8);
    EXPECT_EQ(def.max_turns, 3);
    EXPECT_DOUBLE_EQ(def.clip_epsilon, 0.2);
    EXPECT_DOUBLE_EQ(def.kl_coef, 1e-3);
    EXPECT_EQ(def.ladder.low, (SamplingShape{64, 224, 224}));
    EXPECT_EQ(def.ladder.high, (SamplingShape{32, 448, 448}));
    RunConfig c;
    c.seed = 77;
    c.reward.strict_gating = true;
    c.fixed_config_group = true;
    c.ladder.low.frames = 40;
    const RunConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, FixedGroupUsesMiddleRung) {
    RunConfig c;
    c.fixed_config_group = true;
    const auto g = group_configs(c);
    ASSERT_EQ(g.size(), 8u);
    for (const auto& s : g) EXPECT_EQ(s.shape(), (SamplingShape{50, 320, 320}));
    c.group_size = 5;
    for (const auto& s : group_configs(c)) EXPECT_EQ(s.rung, 3);
    c.fixed_config_group = false;
    EXPECT_EQ(group_configs(c), build_ladder(c.ladder, 5));
}

TEST(Train, ZeroStepsKeepsInitialisation) {
    TempDir d("train0");
    ASSERT_EQ(run_cli("gen --count 2 --seed 1 --out " + (d / "data").string()), 0);
    auto cfg = small_config(0, 5);
    cfg["init_scale"] = 0.3;
    write_json(d / "config.json", cfg);
    ASSERT_EQ(run_cli("train --config " + (d / "config.json").string()), 0);
    const auto ck = nlohmann::json::parse(slurp(d / "run" / "checkpoint.json"));
    const toy::ToyPolicy init(5, 0.3);
    EXPECT_EQ(ck["theta"].get<std::vector<double>>(),
              std::vector<double>(init.parameters().begin(), init.parameters().end()));
    EXPECT_EQ(ck["steps_done"], 0);
    EXPECT_EQ(fs::file_size(d / "run" / "metrics.jsonl"), 0u);
}

TEST(Train, WritesRunFilesAndReplaysExactly) {
    TempDir d("replay");
    ASSERT_EQ(run_cli("gen --count 6 --seed 2 --out " + (d / "data").string()), 0);
    write_json(d / "a.json", {{"dataset", "data"}, {"out_dir", "run_a"}, {"steps", 30}, {"seed", 4}});
    write_json(d / "b.json", {{"dataset", "data"}, {"out_dir", "run_b"}, {"steps", 30}, {"seed", 4}});
    ASSERT_EQ(run_cli("train --config " + (d / "a.json").string()), 0);
    ASSERT_EQ(run_cli("train --config " + (d / "b.json").string()), 0);
    for (const char* f : {"config.json", "metrics.jsonl", "checkpoint.json", "trajectories.jsonl"})
        EXPECT_TRUE(fs::exists(d / "run_a" / f)) << f;
    EXPECT_EQ(lines_in(d / "run_a" / "metrics.jsonl"), 30u);
    EXPECT_EQ(slurp(d / "run_a" / "metrics.jsonl"), slurp(d / "run_b" / "metrics.jsonl"));
    EXPECT_EQ(slurp(d / "run_a" / "trajectories.jsonl"), slurp(d / "run_b" / "trajectories.jsonl"));
    const auto first = nlohmann::json::parse(slurp(d / "run_a" / "metrics.jsonl").substr(0, slurp(d / "run_a" / "metrics.jsonl").find('\n')));
    for (const char* k : {"step", "objective", "kl", "mean_reward", "mean_acc", "question_id", "void"})
        EXPECT_TRUE(first.contains(k)) << k;
}

TEST(Train, StrictGatingChangesTheRun) {
    TempDir d("strict");
    ASSERT_EQ(run_cli("gen --count 4 --seed 2 --out " + (d / "data").string()), 0);
    write_json(d / "a.json", {{"dataset", "data"}, {"out_dir", "a"}, {"steps", 20}, {"seed", 4}});
    write_json(d / "b.json",
               {{"dataset", "data"}, {"out_dir", "b"}, {"steps", 20}, {"seed", 4}, {"strict_gating", true}});
    ASSERT_EQ(run_cli("train --config " + (d / "a.json").string()), 0);
    ASSERT_EQ(run_cli("train --config " + (d / "b.json").string()), 0);
    EXPECT_NE(slurp(d / "a" / "metrics.jsonl"), slurp(d / "b" / "metrics.jsonl"));
}

TEST(Train, AllVoidBatchesAreDegenerate) {
    TempDir d("dead");
    cmd_gen(2, 1, d.path());
    const auto data = load_dataset(d.path());
    RunConfig cfg;
    cfg.steps = 3;
    DeadPolicy p;
    EXPECT_THROW(train_policy(p, cfg, data), DegenerateTrainingError);
}

TEST(Eval, ReportSchemaAndMissingFiles) {
    TempDir d("eval");
    ASSERT_EQ(run_cli("gen --count 3 --seed 8 --out " + (d / "data").string()), 0);
    write_json(d / "c.json", small_config(5));
    ASSERT_EQ(run_cli("train --config " + (d / "c.json").string()), 0);
    ASSERT_EQ(run_cli("eval --checkpoint " + (d / "run" / "checkpoint.json").string() + " --dataset " +
                      (d / "data").string() + " --out " + (d / "report.json").string()),
              0);
    const auto r = nlohmann::json::parse(slurp(d / "report.json"));
    EXPECT_EQ(r["n"], 6);
    std::set<std::string> kinds;
    for (const auto& [k, v] : r["per_kind"].items()) kinds.insert(k);
    EXPECT_EQ(kinds, (std::set<std::string>{"temporal", "spatial"}));
    for (const char* k : {"accuracy", "mean_turns", "tool_usage", "format_valid_rate", "rung"})
        EXPECT_TRUE(r.contains(k)) << k;
    EXPECT_EQ(run_cli("eval --checkpoint " + (d / "nope.json").string() + " --dataset " + (d / "data").string()), 2);
    EXPECT_EQ(run_cli("eval --checkpoint " + (d / "run" / "checkpoint.json").string() + " --dataset " +
                      (d / "nodata").string()),
              2);
    EXPECT_EQ(run_cli("eval --checkpoint " + (d / "run" / "checkpoint.json").string() + " --dataset " +
                      (d / "data").string() + " --rung 9"),
              2);
}

TEST(Eval, OraclePolicyIsPerfect) {
    TempDir d("oracle");
    cmd_gen(30, 5, d.path());
    const auto data = load_dataset(d.path());
    toy::BothToolsThenAnswerPolicy p;
    const auto r = evaluate(p, data, build_ladder({}, 8)[0]);
    EXPECT_EQ(r.accuracy(), 1.0);
    EXPECT_EQ(r.both_tools_rate, 1.0);
    EXPECT_EQ(r.format_valid_rate, 1.0);
    EXPECT_EQ(r.mean_turns, 3.0);
}

TEST(Eval, RandomInitSpatialIsNearChance) {
    // Untrained greedy policies answer from 224 px frames and fall back to
    // the first palette entry, so spatial accuracy sits near 1/8.
    TempDir d("chance");
    cmd_gen(200, 6, d.path());
    const auto data = load_dataset(d.path());
    double sum = 0;
    const int inits = 5;
    for (int s = 0; s < inits; ++s) {
        toy::ToyPolicy p(static_cast<std::uint64_t>(s), 0.1);
        p.set_greedy(true);
        sum += evaluate(p, data, build_ladder({}, 8)[0]).per_kind.at("spatial").accuracy();
    }
    EXPECT_NEAR(sum / inits, 1.0 / 8, 0.08);
}

TEST(Ablate, WritesBothRunsAndSummary) {
    TempDir d("ablate");
    ASSERT_EQ(run_cli("gen --count 4 --seed 2 --out " + (d / "data").string()), 0);
    write_json(d / "c.json", {{"dataset", "data"}, {"out_dir", "abl"}, {"steps", 10}, {"seed", 1}});
    ASSERT_EQ(run_cli("ablate-bonus --config " + (d / "c.json").string()), 0);
    EXPECT_TRUE(fs::exists(d / "abl" / "bonus" / "metrics.jsonl"));
    EXPECT_TRUE(fs::exists(d / "abl" / "strict" / "metrics.jsonl"));
    const auto s = nlohmann::json::parse(slurp(d / "abl" / "ablation.json"));
    EXPECT_TRUE(s.contains("accuracy_gap"));
    EXPECT_EQ(nlohmann::json::parse(slurp(d / "abl" / "strict" / "config.json"))["strict_gating"], true);
}
