// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: one JSON file per run, validated on load. Unknown keys
// are rejected so a typo cannot silently fall back to a default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "framemind/drfs.hpp"
#include "framemind/grpo.hpp"
#include "framemind/reward.hpp"

namespace framemind {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class JudgeMode { stub, remote };

struct RunConfig {
    LadderEndpoints ladder;
    int group_size = 8;
    int max_turns = protocol::kDefaultMaxTurns;
    int evidence_turns = 2;
    RewardConfig reward;
    double clip_epsilon = 0.2;
    double kl_coef = 1e-3;
    double learning_rate = 0.05;
    double max_grad_norm = 1.0;
    int steps = 2000;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
    JudgeMode judge = JudgeMode::stub;
    std::string judge_url;
    bool fixed_config_group = false;
    int eval_rung = 1;
    int trajectory_log_every = 100; // 0 disables trajectories.jsonl
    std::string dataset;
    std::string eval_dataset; // defaults to `dataset`
    std::string out_dir;

    TrainConfig train_config() const {
        return {clip_epsilon, kl_coef, learning_rate, max_grad_norm, group_size, max_turns};
    }

    void validate() const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) throw ConfigError("invalid config: " + what);
        };
        try {
            ladder.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("invalid config: ") + e.what());
        }
        need(group_size >= 2, "group_size must be >= 2");
        need(max_turns >= 1, "max_turns must be >= 1");
        need(evidence_turns >= 0, "evidence_turns must be >= 0");
        need(reward.turn_bonus >= 0.0, "reward.turn_bonus must be >= 0");
        need(reward.single_tool_score >= 0.0 && reward.synergy_tool_score >= 0.0, "tool scores must be >= 0");
        need(reward.gating_base >= 0.0 && reward.gating_base <= 1.0, "reward.gating_base must lie in [0, 1]");
        need(clip_epsilon > 0.0 && clip_epsilon < 1.0, "clip_epsilon must lie in (0, 1)");
        need(kl_coef >= 0.0, "kl_coef must be >= 0");
        need(learning_rate > 0.0, "learning_rate must be > 0");
        need(max_grad_norm >= 0.0, "max_grad_norm must be >= 0 (0 disables clipping)");
        need(steps >= 0, "steps must be >= 0");
        need(init_scale >= 0.0, "init_scale must be >= 0");
        need(judge == JudgeMode::stub || !judge_url.empty(), "judge \"remote\" needs judge_url");
        need(eval_rung >= 1 && eval_rung <= group_size, "eval_rung must lie in [1, group_size]");
        need(trajectory_log_every >= 0, "trajectory_log_every must be >= 0");
    }
};

namespace detail {

inline nlohmann::json shape_json(const SamplingShape& s) {
    return {{"frames", s.frames}, {"height", s.height}, {"width", s.width}};
}

inline SamplingShape shape_from(const nlohmann::json& j, const std::string& where) {
    for (const auto& [k, v] : j.items())
        if (k != "frames" && k != "height" && k != "width") throw ConfigError("unknown key " + where + "." + k);
    SamplingShape s;
    s.frames = j.at("frames").get<int>();
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    return s;
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"ladder", {{"low", detail::shape_json(c.ladder.low)}, {"high", detail::shape_json(c.ladder.high)}}},
            {"group_size", c.group_size},
            {"max_turns", c.max_turns},
            {"evidence_turns", c.evidence_turns},
            {"reward",
             {{"turn_bonus", c.reward.turn_bonus},
              {"single_tool_score", c.reward.single_tool_score},
              {"synergy_tool_score", c.reward.synergy_tool_score},
              {"gating_base", c.reward.gating_base}}},
            {"strict_gating", c.reward.strict_gating},
            {"fixed_config_group", c.fixed_config_group},
            {"clip_epsilon", c.clip_epsilon},
            {"kl_coef", c.kl_coef},
            {"learning_rate", c.learning_rate},
            {"max_grad_norm", c.max_grad_norm},
            {"steps", c.steps},
            {"seed", c.seed},
            {"init_scale", c.init_scale},
            {"judge", c.judge == JudgeMode::stub ? "stub" : "remote"},
            {"judge_url", c.judge_url},
            {"eval_rung", c.eval_rung},
            {"trajectory_log_every", c.trajectory_log_every},
            {"dataset", c.dataset},
            {"eval_dataset", c.eval_dataset},
            {"out_dir", c.out_dir}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"ladder",       "group_size",    "max_turns",     "evidence_turns",
                                             "reward",       "strict_gating", "fixed_config_group",
                                             "clip_epsilon", "kl_coef",       "learning_rate", "max_grad_norm",
                                             "steps",        "seed",          "init_scale",    "judge",
                                             "judge_url",    "eval_rung",     "trajectory_log_every",
                                             "dataset",      "eval_dataset",  "out_dir"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key \"" + k + "\"");

    RunConfig c;
    try {
        if (j.contains("ladder")) {
            const auto& l = j["ladder"];
            for (const auto& [k, v] : l.items())
                if (k != "low" && k != "high") throw ConfigError("unknown key ladder." + k);
            if (l.contains("low")) c.ladder.low = detail::shape_from(l["low"], "ladder.low");
            if (l.contains("high")) c.ladder.high = detail::shape_from(l["high"], "ladder.high");
        }
        if (j.contains("reward")) {
            const auto& r = j["reward"];
            static const std::set<std::string> rk{"turn_bonus", "single_tool_score", "synergy_tool_score", "gating_base"};
            for (const auto& [k, v] : r.items())
                if (!rk.count(k)) throw ConfigError("unknown key reward." + k);
            c.reward.turn_bonus = r.value("turn_bonus", c.reward.turn_bonus);
            c.reward.single_tool_score = r.value("single_tool_score", c.reward.single_tool_score);
            c.reward.synergy_tool_score = r.value("synergy_tool_score", c.reward.synergy_tool_score);
            c.reward.gating_base = r.value("gating_base", c.reward.gating_base);
        }
        c.reward.strict_gating = j.value("strict_gating", c.reward.strict_gating);
        c.fixed_config_group = j.value("fixed_config_group", c.fixed_config_group);
        c.group_size = j.value("group_size", c.group_size);
        c.max_turns = j.value("max_turns", c.max_turns);
        c.evidence_turns = j.value("evidence_turns", c.evidence_turns);
        c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
        c.kl_coef = j.value("kl_coef", c.kl_coef);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
        c.steps = j.value("steps", c.steps);
        c.seed = j.value("seed", c.seed);
        c.init_scale = j.value("init_scale", c.init_scale);
        const std::string judge = j.value("judge", std::string("stub"));
        if (judge == "stub")
            c.judge = JudgeMode::stub;
        else if (judge == "remote")
            c.judge = JudgeMode::remote;
        else
            throw ConfigError("judge must be \"stub\" or \"remote\", got \"" + judge + "\"");
        c.judge_url = j.value("judge_url", c.judge_url);
        c.eval_rung = j.value("eval_rung", c.eval_rung);
        c.trajectory_log_every = j.value("trajectory_log_every", c.trajectory_log_every);
        c.dataset = j.value("dataset", c.dataset);
        c.eval_dataset = j.value("eval_dataset", c.eval_dataset);
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Relative dataset/out_dir paths are taken relative to the config file.
inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    RunConfig c = config_from_json(j);
    const auto base = path.parent_path();
    auto rebase = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    rebase(c.dataset);
    rebase(c.eval_dataset);
    rebase(c.out_dir);
    return c;
}

} // namespace framemind
