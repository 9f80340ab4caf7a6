// SPDX-License-Identifier: Apache-2.0
#pragma once

// FrameAt / VideoClip tools. Every failure is returned as an "ERROR: ..."
// value so the policy can read it back and correct itself.

#include <algorithm>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "framemind/protocol.hpp"
#include "framemind/video.hpp"

namespace framemind {

inline constexpr int kToolResolution = 448;
inline constexpr int kClipMinFrames = 8;
inline constexpr int kClipMaxFrames = 20;

enum class ToolKind { FrameAt, VideoClip };

constexpr std::string_view tool_name(ToolKind kind) {
    return kind == ToolKind::FrameAt ? "FrameAt" : "VideoClip";
}

struct FrameAtArgs {
    double time = 0.0;
};

struct VideoClipArgs {
    double t_start = 0.0;
    double t_end = 0.0;
};

struct ToolCallSpec {
    ToolKind name = ToolKind::FrameAt;
    std::variant<FrameAtArgs, VideoClipArgs> args;

    static ToolCallSpec frame_at(double t) { return {ToolKind::FrameAt, FrameAtArgs{t}}; }
    static ToolCallSpec video_clip(double t0, double t1) { return {ToolKind::VideoClip, VideoClipArgs{t0, t1}}; }
};

struct ToolResult {
    std::optional<ToolKind> tool; // unset when the call could not be parsed
    std::vector<TimedFrame> frames;
    std::optional<std::string> error;

    bool ok() const { return !error.has_value(); }

    static ToolResult failure(std::optional<ToolKind> tool, std::string message) {
        return ToolResult{tool, {}, std::move(message)};
    }
};

inline Frame resize(const Frame& frame, int height, int width) {
    return Frame{resize_nearest(frame.pixels, height, width), frame.timestamp, frame.index};
}

inline std::string duration_label(const VideoSource& source) {
    return fmt::format("Video duration is {}s.", std::lround(source.duration()));
}

inline std::string invalid_timestamp(const VideoSource& source, std::string_view detail = {}) {
    std::string msg = "ERROR: Invalid timestamp. ";
    if (!detail.empty()) {
        msg.append(detail);
        msg += ' ';
    }
    return msg + duration_label(source);
}

inline ToolResult frame_at(const VideoSource& source, double t) {
    if (!std::isfinite(t) || t < 0.0 || t > source.duration())
        return ToolResult::failure(ToolKind::FrameAt, invalid_timestamp(source));
    Frame f = resize(source.frame(source.nearest_index(t)), kToolResolution, kToolResolution);
    const double ts = f.timestamp;
    return ToolResult{ToolKind::FrameAt, {TimedFrame{std::move(f), ts}}, std::nullopt};
}

/// Frame count for a clip of `span` seconds: two per second, clamped to [8, 20].
inline int clip_frame_count(double span) {
    const long n = std::lround(2.0 * span);
    return static_cast<int>(std::clamp<long>(n, kClipMinFrames, kClipMaxFrames));
}

/// Evenly spaced sample times over [t0, t1], both ends included.
inline std::vector<double> uniform_times(double t0, double t1, int n) {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n));
    if (n == 1) {
        times.push_back((t0 + t1) / 2.0);
        return times;
    }
    const double step = (t1 - t0) / (n - 1);
    for (int i = 0; i < n; ++i) times.push_back(i == n - 1 ? t1 : t0 + step * i);
    return times;
}

inline ToolResult video_clip(const VideoSource& source, double t_start, double t_end) {
    const auto fail = [&](std::string_view detail) {
        return ToolResult::failure(ToolKind::VideoClip, invalid_timestamp(source, detail));
    };
    if (!std::isfinite(t_start) || !std::isfinite(t_end)) return fail("Timestamps must be finite numbers.");
    if (t_start < 0.0) return fail("t_start must be >= 0.");
    if (t_end > source.duration()) return fail(fmt::format("t_end must be <= {}s.", std::lround(source.duration())));
    if (t_end <= t_start) return fail("t_end must be greater than t_start.");

    ToolResult out{ToolKind::VideoClip, {}, std::nullopt};
    for (double t : uniform_times(t_start, t_end, clip_frame_count(t_end - t_start)))
        out.frames.push_back(
            TimedFrame{resize(source.frame(source.nearest_index(t)), kToolResolution, kToolResolution), t});
    return out;
}

namespace detail {

inline std::optional<ToolKind> tool_from_name(std::string_view name) {
    if (name == "FrameAt") return ToolKind::FrameAt;
    if (name == "VideoClip") return ToolKind::VideoClip;
    return std::nullopt;
}

inline std::optional<double> number_field(const nlohmann::json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number()) return std::nullopt;
    return obj[key].get<double>();
}

} // namespace detail

using ParsedCall = std::variant<ToolCallSpec, ToolResult>;

/// Accepts the JSON form `{"name": ..., "arguments": {...}}` and the call
/// form `VideoClip(15.5, 20.0)`. Anything else yields an error result.
inline ParsedCall parse_tool_call(std::string_view raw) {
    const std::string text(protocol::trim(raw));
    auto malformed = [](std::optional<ToolKind> tool, std::string why) -> ParsedCall {
        return ToolResult::failure(tool, "ERROR: Malformed tool call: " + why + ".");
    };
    if (text.empty()) return malformed(std::nullopt, "empty call");

    std::string name;
    std::optional<double> a, b;
    if (text.front() == '{') {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return malformed(std::nullopt, "invalid JSON");
        if (!j.contains("name") || !j["name"].is_string()) return malformed(std::nullopt, "missing \"name\"");
        name = j["name"].get<std::string>();
        const nlohmann::json args = j.value("arguments", nlohmann::json::object());
        if (auto kind = detail::tool_from_name(name)) {
            if (*kind == ToolKind::FrameAt) {
                a = detail::number_field(args, "time");
                if (!a) return malformed(kind, "FrameAt requires numeric \"time\"");
                return ToolCallSpec::frame_at(*a);
            }
            a = detail::number_field(args, "t_start");
            b = detail::number_field(args, "t_end");
            if (!a || !b) return malformed(kind, "VideoClip requires numeric \"t_start\" and \"t_end\"");
            return ToolCallSpec::video_clip(*a, *b);
        }
    } else {
        static const std::regex call_re(R"(^([A-Za-z_]\w*)\s*\(\s*([^()]*?)\s*\)$)");
        static const std::regex num_re(R"(^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$)");
        std::smatch m;
        if (!std::regex_match(text, m, call_re)) return malformed(std::nullopt, "expected Name(args)");
        name = m[1].str();
        std::vector<double> nums;
        const std::string arglist = m[2].str();
        if (!arglist.empty()) {
            std::size_t start = 0;
            while (start <= arglist.size()) {
                const std::size_t comma = std::min(arglist.find(',', start), arglist.size());
                const std::string tok(protocol::trim(std::string_view(arglist).substr(start, comma - start)));
                if (!std::regex_match(tok, num_re)) return malformed(detail::tool_from_name(name), "non-numeric argument");
                nums.push_back(std::stod(tok));
                start = comma + 1;
            }
        }
        if (auto kind = detail::tool_from_name(name)) {
            if (*kind == ToolKind::FrameAt) {
                if (nums.size() != 1) return malformed(kind, "FrameAt takes exactly one argument");
                return ToolCallSpec::frame_at(nums[0]);
            }
            if (nums.size() != 2) return malformed(kind, "VideoClip takes exactly two arguments");
            return ToolCallSpec::video_clip(nums[0], nums[1]);
        }
    }
    return ToolResult::failure(std::nullopt, "ERROR: Unknown tool " + name + ".");
}

inline ToolResult execute(const ToolCallSpec& call, const VideoSource& source) {
    if (const auto* fa = std::get_if<FrameAtArgs>(&call.args)) return frame_at(source, fa->time);
    const auto& vc = std::get<VideoClipArgs>(call.args);
    return video_clip(source, vc.t_start, vc.t_end);
}

inline ToolResult execute(std::string_view raw_call, const VideoSource& source) {
    ParsedCall parsed = parse_tool_call(raw_call);
    if (auto* err = std::get_if<ToolResult>(&parsed)) return std::move(*err);
    return execute(std::get<ToolCallSpec>(parsed), source);
}

inline std::string frame_ref(const VideoSource& source, const Frame& f) {
    return fmt::format("{}#{}@{}x{}", source.id(), f.index, f.pixels.height(), f.pixels.width());
}

/// Log form: {tool, timestamps, frame_refs} or {tool, error}.
inline nlohmann::json to_log_json(const ToolResult& result, const VideoSource& source) {
    nlohmann::json j;
    j["tool"] = result.tool ? nlohmann::json(std::string(tool_name(*result.tool))) : nlohmann::json(nullptr);
    if (!result.ok()) {
        j["error"] = *result.error;
        return j;
    }
    j["timestamps"] = nlohmann::json::array();
    j["frame_refs"] = nlohmann::json::array();
    for (const auto& tf : result.frames) {
        j["timestamps"].push_back(tf.timestamp);
        j["frame_refs"].push_back(frame_ref(source, tf.frame));
    }
    return j;
}

/// Text placed inside <tool_response> for the next turn.
inline std::string describe_for_prompt(const ToolResult& result) {
    if (!result.ok()) return *result.error;
    std::string out = fmt::format("{} returned {} frame(s) at {}x{}:", tool_name(*result.tool), result.frames.size(),
                                  kToolResolution, kToolResolution);
    for (const auto& tf : result.frames) out += fmt::format(" <frame t={:.2f}s>", tf.timestamp);
    return out;
}

} // namespace framemind
