// SPDX-License-Identifier: Apache-2.0
#pragma once

// A small log-linear policy for the synthetic world, plus scripted fixtures.
// Every turn is rendered from a handful of discrete decisions; the same
// decisions are recovered from the text when log-probabilities are needed.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "framemind/decision.hpp"
#include "framemind/protocol.hpp"
#include "framemind/rollout.hpp"
#include "framemind/toyworld.hpp"
#include "framemind/videotool.hpp"

namespace framemind::toy {

inline constexpr int kTimeBins = 12;

// Parameter layout.
enum Param : std::size_t {
    p_continue_t1,
    p_continue_t2,
    p_continue_t3,
    p_continue_resolved,
    p_frameat_bias,
    p_frameat_used,
    p_frameat_resolved,
    p_clip_bias,
    p_clip_used,
    p_clip_resolved,
    p_time_after_onset,
    p_time_before_blank,
    p_span_covers_onset,
    p_span_after_onset,
    p_span_full,
    p_frameat_temporal,
    p_clip_temporal,
    kParamCount
};

inline constexpr std::array<std::string_view, kParamCount> kParamNames{
    "continue_t1",      "continue_t2",       "continue_t3",        "continue_resolved", "frameat_bias",
    "frameat_used",     "frameat_resolved",  "clip_bias",          "clip_used",         "clip_resolved",
    "time_after_onset", "time_before_blank", "span_covers_onset",  "span_after_onset",  "span_full",
    "frameat_temporal", "clip_temporal"};

struct TimeSpan {
    double start = 0.0;
    double end = 0.0;
    bool full = false;
};

/// What the policy knows at the start of a turn.
struct ToyContext {
    TaskKind kind = TaskKind::temporal;
    int turn = 1;
    bool used_frame_at = false;
    bool used_video_clip = false;
    EvidenceFeatures all;
    EvidenceFeatures top;
    std::size_t frames_seen = 0;
    double duration = 60.0;

    bool resolved() const {
        if (kind == TaskKind::spatial) return top.color.has_value();
        return all.earliest_nonblank && all.latest_blank_before &&
               *all.earliest_nonblank - *all.latest_blank_before <= 1.0 + 1e-9;
    }

    /// argmax over time bins / palette, falling back to the first bin.
    std::string answer() const {
        if (auto a = perceived_answer(all, top, kind)) return *a;
        if (kind == TaskKind::spatial) return std::string(kPalette[0].name);
        return all.latest_blank ? std::to_string(std::lround(*all.latest_blank) + 1) : "0";
    }

    std::vector<double> time_grid() const {
        std::vector<double> t;
        for (int j = 0; j < kTimeBins; ++j) t.push_back((j + 0.5) * duration / kTimeBins);
        return t;
    }

    std::vector<TimeSpan> span_grid() const {
        std::vector<TimeSpan> s;
        for (int j = 0; j < kTimeBins; ++j) s.push_back({j * duration / kTimeBins, (j + 1) * duration / kTimeBins, false});
        s.push_back({0.0, duration, true});
        return s;
    }
};

namespace detail {

inline std::vector<std::string_view> assistant_turns(std::string_view history) {
    static constexpr std::string_view kOpen = "\n\nassistant:\n";
    static constexpr std::string_view kUser = "\n\nuser:\n";
    std::vector<std::string_view> out;
    std::size_t pos = history.find(kOpen);
    while (pos != std::string_view::npos) {
        const std::size_t body = pos + kOpen.size();
        const std::size_t end = std::min(history.find(kUser, body), history.find(kOpen, body));
        out.push_back(history.substr(body, end == std::string_view::npos ? std::string_view::npos : end - body));
        pos = history.find(kOpen, body);
    }
    return out;
}

} // namespace detail

inline ToyContext read_context(std::string_view history, const EvidenceWindow& window) {
    ToyContext c;
    const auto kind = kind_of_question(history);
    if (!kind) throw std::invalid_argument("history does not hold a toy-world question");
    c.kind = *kind;
    const auto turns = detail::assistant_turns(history);
    c.turn = static_cast<int>(turns.size()) + 1;
    for (auto t : turns)
        for (const auto& block : protocol::parse_turn(t).tool_calls()) {
            auto parsed = parse_tool_call(block);
            if (const auto* spec = std::get_if<ToolCallSpec>(&parsed)) {
                c.used_frame_at |= spec->name == ToolKind::FrameAt;
                c.used_video_clip |= spec->name == ToolKind::VideoClip;
            }
        }
    const auto all = window_frames(window, false);
    c.frames_seen = all.size();
    c.all = perceive_frames(all);
    c.top = perceive_frames(window_frames(window, true));
    double d = 0.0;
    for (const auto& tf : all) d = std::max(d, tf.timestamp);
    if (d > 0.0) c.duration = d;
    return c;
}

// ---------------------------------------------------------------------------
// Decisions

inline Decision stop_decision(const ToyContext& c, bool answer) {
    const std::size_t turn_feature = p_continue_t1 + static_cast<std::size_t>(std::clamp(c.turn, 1, 3) - 1);
    return {"stop", {{}, {{turn_feature, 1.0}, {p_continue_resolved, c.resolved() ? 1.0 : 0.0}}}, answer ? 0u : 1u};
}

inline Decision tool_decision(const ToyContext& c, std::size_t chosen) {
    const double res = c.resolved() ? 1.0 : 0.0;
    const double tmp = c.kind == TaskKind::temporal ? 1.0 : 0.0;
    return {"tool",
            {{},
             {{p_frameat_bias, 1.0}, {p_frameat_used, c.used_frame_at ? 1.0 : 0.0}, {p_frameat_resolved, res},
              {p_frameat_temporal, tmp}},
             {{p_clip_bias, 1.0}, {p_clip_used, c.used_video_clip ? 1.0 : 0.0}, {p_clip_resolved, res},
              {p_clip_temporal, tmp}}},
            chosen};
}

inline Decision time_decision(const ToyContext& c, std::size_t chosen) {
    Decision d{"frame_time", {}, chosen};
    for (double t : c.time_grid()) {
        const bool after = c.all.earliest_nonblank && t >= *c.all.earliest_nonblank;
        const std::optional<double> blank = c.all.earliest_nonblank ? c.all.latest_blank_before : c.all.latest_blank;
        const bool before = blank && t <= *blank;
        d.options.push_back({{p_time_after_onset, after ? 1.0 : 0.0}, {p_time_before_blank, before ? 1.0 : 0.0}});
    }
    return d;
}

inline Decision span_decision(const ToyContext& c, std::size_t chosen) {
    Decision d{"clip_span", {}, chosen};
    const auto onset = c.all.earliest_nonblank;
    for (const auto& s : c.span_grid()) {
        const bool covers = onset && s.start <= *onset && *onset <= s.end;
        const bool after = onset && s.start > *onset;
        d.options.push_back({{p_span_covers_onset, covers ? 1.0 : 0.0},
                             {p_span_after_onset, after ? 1.0 : 0.0},
                             {p_span_full, s.full ? 1.0 : 0.0}});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_thought(const ToyContext& c) {
    std::string s = fmt::format("Turn {}: {} frames so far, largest {}px. ", c.turn, c.frames_seen, c.all.max_resolution);
    if (c.all.earliest_nonblank)
        s += fmt::format("An object is visible from about {:.1f}s", *c.all.earliest_nonblank);
    else
        s += "No object is visible yet";
    s += c.top.color ? fmt::format(" and it looks {}.", *c.top.color) : std::string(" and its colour is not readable.");
    return s;
}

inline std::string render_call(const ToolCallSpec& call) {
    nlohmann::json j{{"name", std::string(tool_name(call.name))}};
    if (const auto* fa = std::get_if<FrameAtArgs>(&call.args))
        j["arguments"] = {{"time", fa->time}};
    else
        j["arguments"] = {{"t_start", std::get<VideoClipArgs>(call.args).t_start},
                          {"t_end", std::get<VideoClipArgs>(call.args).t_end}};
    return j.dump();
}

inline std::string render_turn_sum(const ToyContext& c, const std::optional<ToolCallSpec>& call) {
    nlohmann::json args{{"attempt", call ? render_call(*call) : std::string("reviewed the sampled frames")},
                        {"observation", render_thought(c)},
                        {"status", c.resolved() ? "partial_progress" : "need_more_info"},
                        {"next_step", "check the new frames"}};
    return nlohmann::json{{"name", "TurnSum"}, {"arguments", args}}.dump();
}

inline std::string render_answer_turn(const ToyContext& c) {
    return protocol::render_block(protocol::TagKind::think, render_thought(c)) + "\n" +
           protocol::render_block(protocol::TagKind::answer, c.answer());
}

inline std::string render_tool_turn(const ToyContext& c, const std::optional<ToolCallSpec>& call) {
    std::string s = protocol::render_block(protocol::TagKind::think, render_thought(c)) + "\n";
    if (call) s += protocol::render_block(protocol::TagKind::tool_call, render_call(*call)) + "\n";
    s += protocol::render_block(protocol::TagKind::turn_sum, render_turn_sum(c, call));
    return s;
}

// ---------------------------------------------------------------------------

class ToyPolicy final : public Policy {
public:
    explicit ToyPolicy(std::uint64_t init_seed = 0, double init_scale = 0.1) : theta_(kParamCount, 0.0) {
        std::mt19937_64 rng(init_seed);
        std::normal_distribution<double> n(0.0, 1.0);
        for (double& v : theta_) v = init_scale * n(rng);
    }

    std::span<const double> parameters() const { return theta_; }
    void set_parameters(std::span<const double> theta) {
        if (theta.size() != kParamCount) throw std::invalid_argument("toy policy expects " + std::to_string(kParamCount) + " parameters");
        theta_.assign(theta.begin(), theta.end());
    }

    void set_greedy(bool g) { greedy_ = g; }
    bool greedy() const { return greedy_; }
    /// Emit an unclosed <think> in answer turns.
    void set_fault_injection(bool f) { faulty_ = f; }

    std::string act(const std::string& history, const EvidenceWindow& window, std::uint64_t seed) override {
        const ToyContext c = read_context(history, window);
        std::mt19937_64 rng(seed);
        const Decision stop = stop_decision(c, true);
        if (choose(theta_, stop.options, rng, greedy_) == 0) {
            std::string text = render_answer_turn(c);
            if (faulty_) text.erase(text.find("</think>"), 8);
            return text;
        }
        const std::size_t tool = choose(theta_, tool_decision(c, 0).options, rng, greedy_);
        std::optional<ToolCallSpec> call;
        if (tool == 1) {
            const auto grid = c.time_grid();
            call = ToolCallSpec::frame_at(grid[choose(theta_, time_decision(c, 0).options, rng, greedy_)]);
        } else if (tool == 2) {
            const auto spans = c.span_grid();
            const auto& s = spans[choose(theta_, span_decision(c, 0).options, rng, greedy_)];
            call = ToolCallSpec::video_clip(s.start, s.end);
        }
        return render_tool_turn(c, call);
    }

    /// Decisions behind `text`, re-derived from the tags it contains.
    std::vector<Decision> decisions(const std::string& history, const EvidenceWindow& window,
                                    const std::string& text) const {
        const ToyContext c = read_context(history, window);
        const auto out = protocol::parse_turn(text);
        if (out.first(protocol::TagKind::answer)) return {stop_decision(c, true)};
        if (!out.first(protocol::TagKind::turn_sum)) throw std::invalid_argument("turn has neither answer nor turn_sum");
        std::vector<Decision> ds{stop_decision(c, false)};
        const auto calls = out.tool_calls();
        if (calls.empty()) {
            ds.push_back(tool_decision(c, 0));
            return ds;
        }
        if (calls.size() > 1) throw std::invalid_argument("toy policy emits at most one tool call per turn");
        const auto parsed = parse_tool_call(calls.front());
        const auto* spec = std::get_if<ToolCallSpec>(&parsed);
        if (!spec) throw std::invalid_argument("unparseable tool call in toy turn");
        auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
        if (const auto* fa = std::get_if<FrameAtArgs>(&spec->args)) {
            ds.push_back(tool_decision(c, 1));
            const auto grid = c.time_grid();
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (near(fa->time, grid[i])) {
                    ds.push_back(time_decision(c, i));
                    return ds;
                }
            throw std::invalid_argument(fmt::format("FrameAt time {} is off the policy grid", fa->time));
        }
        const auto& vc = std::get<VideoClipArgs>(spec->args);
        ds.push_back(tool_decision(c, 2));
        const auto spans = c.span_grid();
        for (std::size_t i = 0; i < spans.size(); ++i)
            if (near(vc.t_start, spans[i].start) && near(vc.t_end, spans[i].end)) {
                ds.push_back(span_decision(c, i));
                return ds;
            }
        throw std::invalid_argument(fmt::format("VideoClip span [{}, {}] is off the policy grid", vc.t_start, vc.t_end));
    }

    std::vector<DecisionLogProb> log_prob(const std::string& history, const EvidenceWindow& window,
                                          const std::string& text) const override {
        std::vector<DecisionLogProb> out;
        for (const auto& d : decisions(history, window, text)) out.push_back({d.name, framemind::log_prob(theta_, d)});
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json named = nlohmann::json::object();
        for (std::size_t i = 0; i < kParamCount; ++i) named[std::string(kParamNames[i])] = theta_[i];
        return nlohmann::json{{"policy", "toy-loglinear"}, {"theta", theta_}, {"named", named}};
    }

    static ToyPolicy from_json(const nlohmann::json& j) {
        ToyPolicy p;
        const auto theta = j.at("theta").get<std::vector<double>>();
        p.set_parameters(theta);
        return p;
    }

private:
    std::vector<double> theta_;
    bool greedy_ = false;
    bool faulty_ = false;
};

// ---------------------------------------------------------------------------
// Scripted fixtures. None of them are trainable; their log-probabilities are 0.

class ScriptedPolicy : public Policy {
public:
    std::vector<DecisionLogProb> log_prob(const std::string&, const EvidenceWindow&, const std::string&) const override {
        return {{"scripted", 0.0}};
    }
};

/// Turn 1: <think/><answer/> from the initial frames.
class ImmediateAnswerPolicy final : public ScriptedPolicy {
public:
    std::string act(const std::string& history, const EvidenceWindow& window, std::uint64_t) override {
        return render_answer_turn(read_context(history, window));
    }
};

/// Every turn: <think/><turn_sum/>, never answers.
class AlwaysCapPolicy final : public ScriptedPolicy {
public:
    std::string act(const std::string& history, const EvidenceWindow& window, std::uint64_t) override {
        return render_tool_turn(read_context(history, window), std::nullopt);
    }
};

/// Turn 1: VideoClip around the onset seen so far (whole video if none).
/// Turn 2: FrameAt one second after it. Turn 3: answer. Solves every task.
class BothToolsThenAnswerPolicy final : public ScriptedPolicy {
public:
    std::string act(const std::string& history, const EvidenceWindow& window, std::uint64_t) override {
        const ToyContext c = read_context(history, window);
        const auto onset = c.all.earliest_nonblank;
        if (c.turn == 1) {
            if (!onset) return render_tool_turn(c, ToolCallSpec::video_clip(0.0, c.duration));
            const double a = std::max(0.0, *onset - 2.5);
            return render_tool_turn(c, ToolCallSpec::video_clip(a, std::min(c.duration, a + 5.0)));
        }
        if (c.turn == 2) return render_tool_turn(c, ToolCallSpec::frame_at(onset ? std::min(c.duration, *onset + 1.0) : c.duration));
        return render_answer_turn(c);
    }
};

/// Turn 1: an unclosed <think> followed by an answer.
class MalformedOutputPolicy final : public ScriptedPolicy {
public:
    std::string act(const std::string& history, const EvidenceWindow& window, std::uint64_t) override {
        const ToyContext c = read_context(history, window);
        return "<think>" + render_thought(c) + "\n" + protocol::render_block(protocol::TagKind::answer, c.answer());
    }
};

} // namespace framemind::toy
