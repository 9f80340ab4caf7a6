// SPDX-License-Identifier: Apache-2.0
#pragma once

// The frame-interleaved loop: generate a turn, run its tool calls, fold the
// results into the evidence window and the dialogue history, repeat until the
// policy answers or the turn cap is hit.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "framemind/advantage.hpp"
#include "framemind/drfs.hpp"
#include "framemind/hash.hpp"
#include "framemind/log.hpp"
#include "framemind/prompts.hpp"
#include "framemind/protocol.hpp"
#include "framemind/reward.hpp"
#include "framemind/videotool.hpp"

namespace framemind {

/// E_0 followed by the retained tool deltas, oldest first.
struct EvidenceWindow {
    std::vector<const EvidenceSet*> sets;

    template <typename Fn>
    void for_each_frame(Fn&& fn) const {
        for (const EvidenceSet* s : sets)
            for (const TimedFrame& tf : s->items) fn(tf);
    }
};

struct DecisionLogProb {
    std::string decision;
    double log_prob = 0.0;
};

/// Raised by a policy that could not produce a turn (e.g. a lost backend).
struct PolicyTransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string act(const std::string& history, const EvidenceWindow& evidence, std::uint64_t seed) = 0;
    virtual std::vector<DecisionLogProb> log_prob(const std::string& history, const EvidenceWindow& evidence,
                                                  const std::string& turn_text) const = 0;
};

struct Turn {
    int index = 1;
    std::string prompt; // history the policy saw
    protocol::TurnOutput output;
    std::vector<ToolResult> tool_results;
    EvidenceSet evidence_delta;
    protocol::Transition transition = protocol::Transition::proceed();
};

struct RolloutOptions {
    int max_turns = protocol::kDefaultMaxTurns;
    int evidence_turns = 2; // tool deltas kept next to E_0
};

struct Trajectory {
    std::string question;
    SamplingConfig config;
    EvidenceSet initial_evidence;
    std::vector<Turn> turns;
    std::optional<std::string> final_answer;
    std::optional<RewardBreakdown> reward;
    std::string transcript;
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
    int evidence_turns = 2;

    /// Policy output only, one turn per line; the format and turn rules apply to this.
    std::string response() const {
        std::string out;
        for (const auto& t : turns) {
            if (!out.empty()) out += '\n';
            out += t.output.raw;
        }
        return out;
    }

    std::vector<ToolKind> successful_tools() const {
        std::vector<ToolKind> kinds;
        for (const auto& t : turns)
            for (const auto& r : t.tool_results)
                if (r.ok() && r.tool) kinds.push_back(*r.tool);
        return kinds;
    }

    /// Evidence visible at the start of turn k (1-based).
    EvidenceWindow window_before(int k) const {
        EvidenceWindow w;
        w.sets.push_back(&initial_evidence);
        const int first = std::max(1, k - evidence_turns);
        for (int j = first; j < k && j <= static_cast<int>(turns.size()); ++j)
            w.sets.push_back(&turns[static_cast<std::size_t>(j - 1)].evidence_delta);
        return w;
    }

    RewardInputs reward_inputs() const { return {question, final_answer, response(), successful_tools()}; }
};

inline std::string system_prompt() {
    std::string s(prompts::kSystem);
    const std::string slot = "{{ content | trim }}";
    if (auto pos = s.find(slot); pos != std::string::npos) s.erase(pos, slot.size());
    return std::string(protocol::trim(s));
}

inline std::string initial_history(const std::string& question) {
    return "system:\n" + system_prompt() + "\n\nuser:\nQuestion: " + question + "\n" + std::string(prompts::kUserTurn1) +
           "\n\n";
}

inline std::string tool_turn_prompt(const std::string& visual_content) {
    std::string s(prompts::kTurnK);
    const std::string slot = "{visual_content}";
    if (auto pos = s.find(slot); pos != std::string::npos) s.replace(pos, slot.size(), visual_content);
    return s;
}

inline EvidenceSet successful_frames(const std::vector<ToolResult>& results) {
    EvidenceSet delta{{}, EvidenceOrigin::tool};
    for (const auto& r : results)
        if (r.ok()) delta.items.insert(delta.items.end(), r.frames.begin(), r.frames.end());
    std::stable_sort(delta.items.begin(), delta.items.end(),
                     [](const TimedFrame& a, const TimedFrame& b) { return a.timestamp < b.timestamp; });
    return delta;
}

inline Trajectory run_rollout(Policy& policy, const VideoSource& source, const std::string& question,
                              const SamplingConfig& config, std::uint64_t seed, const RolloutOptions& opts = {}) {
    Trajectory traj;
    traj.question = question;
    traj.config = config;
    traj.seed = seed;
    traj.evidence_turns = opts.evidence_turns;
    traj.initial_evidence = initial_evidence(source, config);
    traj.turns.reserve(static_cast<std::size_t>(opts.max_turns));

    std::string history = initial_history(question);
    for (int k = 1; k <= opts.max_turns; ++k) {
        std::string text;
        try {
            text = policy.act(history, traj.window_before(k), mix_seed(seed, static_cast<std::uint64_t>(k)));
        } catch (const PolicyTransportError& e) {
            traj.aborted = true;
            traj.abort_reason = e.what();
            break;
        }

        Turn turn;
        turn.index = k;
        turn.prompt = history;
        turn.output = protocol::parse_turn(text);
        for (const auto& call : turn.output.tool_calls()) turn.tool_results.push_back(execute(call, source));
        turn.evidence_delta = successful_frames(turn.tool_results);
        turn.transition = protocol::decide_transition(turn.output, k, opts.max_turns);

        history += "assistant:\n" + text + "\n\n";
        if (!turn.transition.terminal()) {
            std::string visual;
            for (const auto& r : turn.tool_results) {
                if (!visual.empty()) visual += '\n';
                visual += describe_for_prompt(r);
            }
            if (visual.empty()) visual = "(no tool calls)";
            history += "user:\n" + tool_turn_prompt(visual) + "\n\n";
        }
        const bool stop = turn.transition.terminal();
        if (turn.transition.kind() == protocol::Transition::Kind::StopWithAnswer)
            traj.final_answer = turn.transition.answer();
        traj.turns.push_back(std::move(turn));
        if (stop) break;
    }
    traj.transcript = std::move(history);
    return traj;
}

struct GroupBatch {
    std::string question_id;
    std::vector<Trajectory> trajectories; // survivors only
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::size_t dropped = 0;

    bool is_void() const { return trajectories.size() < 2; }
};

using TrajectoryScorer = std::function<RewardBreakdown(const Trajectory&)>;

/// One rollout per ladder rung. Aborted rollouts are dropped and the
/// advantage baseline is taken over the survivors.
inline GroupBatch run_group(Policy& policy, const VideoSource& source, const std::string& question_id,
                            const std::string& question, const std::vector<SamplingConfig>& ladder,
                            const std::vector<std::uint64_t>& seeds, const TrajectoryScorer& score,
                            const RolloutOptions& opts = {}) {
    if (seeds.size() != ladder.size()) throw std::invalid_argument("need one seed per ladder rung");
    GroupBatch batch;
    batch.question_id = question_id;
    for (std::size_t g = 0; g < ladder.size(); ++g) {
        Trajectory t = run_rollout(policy, source, question, ladder[g], seeds[g], opts);
        if (t.aborted) {
            log::warning("rollout for {} rung {} aborted: {}", question_id, ladder[g].rung, t.abort_reason);
            ++batch.dropped;
            continue;
        }
        t.reward = score(t);
        batch.rewards.push_back(t.reward->total);
        batch.trajectories.push_back(std::move(t));
    }
    if (batch.is_void()) {
        log::warning("group {} void: {} of {} rollouts survived", question_id, batch.trajectories.size(), ladder.size());
        return batch;
    }
    batch.advantages = group_advantages(batch.rewards).values;
    return batch;
}

inline nlohmann::json trajectory_record(const Trajectory& t, const std::string& question_id) {
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& turn : t.turns)
        for (std::size_t i = 0; i < turn.tool_results.size(); ++i) {
            const auto& r = turn.tool_results[i];
            calls.push_back({{"turn", turn.index},
                             {"tool", r.tool ? nlohmann::json(std::string(tool_name(*r.tool))) : nlohmann::json(nullptr)},
                             {"ok", r.ok()}});
        }
    nlohmann::json rec{{"question_id", question_id},
                       {"rung", t.config.rung},
                       {"turns", t.turns.size()},
                       {"tool_calls", calls},
                       {"final_answer", t.final_answer ? nlohmann::json(*t.final_answer) : nlohmann::json(nullptr)},
                       {"transcript_hash", hex64(fnv1a64(t.transcript))}};
    rec["reward"] = t.reward ? nlohmann::json(*t.reward) : nlohmann::json(nullptr);
    return rec;
}

} // namespace framemind
