// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic video-QA world. Each video shows an empty scene until an object
// appears at an integer second t* and stays in one cell of a 4x4 grid. Its
// colour is only legible in frames of at least 300 px, so low-resolution
// sampling can localise the event in time but not identify it.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "framemind/drfs.hpp"
#include "framemind/hash.hpp"
#include "framemind/image.hpp"
#include "framemind/reward.hpp"
#include "framemind/rollout.hpp"
#include "framemind/video.hpp"

namespace framemind::toy {

inline constexpr int kGrid = 4;
inline constexpr int kLegibleResolution = 300;
inline constexpr Rgb kBackground{24, 24, 24};

struct PaletteEntry {
    std::string_view name;
    Rgb rgb;
};

inline constexpr std::array<PaletteEntry, 8> kPalette{{{"red", {220, 40, 40}},
                                                       {"green", {40, 200, 60}},
                                                       {"blue", {50, 80, 230}},
                                                       {"yellow", {235, 220, 50}},
                                                       {"cyan", {40, 210, 220}},
                                                       {"magenta", {210, 50, 200}},
                                                       {"orange", {240, 140, 30}},
                                                       {"white", {240, 240, 240}}}};

enum class Shape { square, disc, diamond };

inline constexpr std::array<std::string_view, 3> kShapeNames{"square", "disc", "diamond"};

struct Event {
    int color = 0; // palette index
    Shape shape = Shape::square;
    int appear_second = 0;
    int row = 0;
    int col = 0;
};

struct VideoOptions {
    double duration = 60.0;
    double fps = 1.0;
    int native_size = 448;
    int object_radius = 10; // pixels at native size
};

struct SyntheticVideo {
    std::uint64_t seed = 0;
    std::string id;
    double duration = 60.0;
    double fps = 1.0;
    int native_size = 448;
    Event event;
};

namespace detail {

inline std::uint64_t draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t bound) {
    return mix_seed(seed, stream) % bound;
}

inline bool inside(Shape shape, int dy, int dx, int radius) {
    switch (shape) {
    case Shape::square: return std::abs(dy) <= radius && std::abs(dx) <= radius;
    case Shape::disc: return dy * dy + dx * dx <= radius * radius;
    case Shape::diamond: return std::abs(dy) + std::abs(dx) <= radius;
    }
    return false;
}

inline Image render_event(const SyntheticVideo& v, int radius) {
    const int n = v.native_size;
    std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n * 3);
    const Rgb fg = kPalette[static_cast<std::size_t>(v.event.color)].rgb;
    const int cy = (2 * v.event.row + 1) * n / (2 * kGrid);
    const int cx = (2 * v.event.col + 1) * n / (2 * kGrid);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const Rgb c = inside(v.event.shape, y - cy, x - cx, radius) ? fg : kBackground;
            const std::size_t i = (static_cast<std::size_t>(y) * n + x) * 3;
            px[i] = c.r;
            px[i + 1] = c.g;
            px[i + 2] = c.b;
        }
    return Image(n, n, std::move(px));
}

} // namespace detail

/// Deterministic in `seed`. The returned source shares two frame buffers:
/// the empty scene and the scene with the object.
inline std::pair<SyntheticVideo, VideoSource> gen_video(std::uint64_t seed, const VideoOptions& opts = {}) {
    SyntheticVideo v;
    v.seed = seed;
    v.id = "vid" + hex64(mix_seed(seed, 0)).substr(0, 10);
    v.duration = opts.duration;
    v.fps = opts.fps;
    v.native_size = opts.native_size;
    const int lo = static_cast<int>(std::ceil(0.1 * opts.duration));
    const int hi = static_cast<int>(std::floor(0.9 * opts.duration));
    v.event.appear_second = lo + static_cast<int>(detail::draw(seed, 1, static_cast<std::uint64_t>(hi - lo + 1)));
    v.event.color = static_cast<int>(detail::draw(seed, 2, kPalette.size()));
    v.event.shape = static_cast<Shape>(detail::draw(seed, 3, kShapeNames.size()));
    v.event.row = static_cast<int>(detail::draw(seed, 4, kGrid));
    v.event.col = static_cast<int>(detail::draw(seed, 5, kGrid));

    const Image blank(v.native_size, v.native_size, kBackground);
    const Image shown = detail::render_event(v, opts.object_radius);
    const double appear = v.event.appear_second;
    const double fps = v.fps;
    VideoSource source(v.id, v.duration, v.fps, [blank, shown, appear, fps](std::size_t i) {
        return static_cast<double>(i) / fps >= appear ? shown : blank;
    });
    return {v, std::move(source)};
}

enum class TaskKind { temporal, spatial };

constexpr std::string_view task_kind_name(TaskKind k) { return k == TaskKind::temporal ? "temporal" : "spatial"; }

inline constexpr std::string_view kTemporalQuestion = "At what second does the object first appear in the video?";
inline constexpr std::string_view kSpatialQuestion = "What color is the object that appears in the video?";

struct Task {
    std::string video_id;
    TaskKind kind = TaskKind::temporal;
    std::string question;
    std::string gold;

    AnswerScoring scoring() const {
        return kind == TaskKind::temporal ? AnswerScoring{QuestionKind::exact_match, 1.0}
                                          : AnswerScoring{QuestionKind::exact_match, 0.0};
    }
};

inline std::optional<TaskKind> kind_of_question(std::string_view question) {
    if (question.find(kTemporalQuestion) != std::string_view::npos) return TaskKind::temporal;
    if (question.find(kSpatialQuestion) != std::string_view::npos) return TaskKind::spatial;
    return std::nullopt;
}

inline std::string oracle_answer(const SyntheticVideo& video, TaskKind kind) {
    if (kind == TaskKind::temporal) return std::to_string(video.event.appear_second);
    return std::string(kPalette[static_cast<std::size_t>(video.event.color)].name);
}

inline std::array<Task, 2> make_tasks(const SyntheticVideo& video) {
    return {Task{video.id, TaskKind::temporal, std::string(kTemporalQuestion), oracle_answer(video, TaskKind::temporal)},
            Task{video.id, TaskKind::spatial, std::string(kSpatialQuestion), oracle_answer(video, TaskKind::spatial)}};
}

// ---------------------------------------------------------------------------
// Perception

inline constexpr std::string_view kUnknownColor = "unknown";

struct EvidenceFeatures {
    int max_resolution = 0;
    std::map<std::string, int> color_histogram; // nonblank cells by colour name
    std::optional<double> earliest_nonblank;    // source timestamp
    std::optional<double> latest_blank_before;  // last empty frame before earliest_nonblank
    std::optional<double> latest_blank;         // last empty frame overall
    std::optional<std::string> color;           // most frequent legible colour

    bool object_present() const { return earliest_nonblank.has_value(); }
};

inline std::string_view nearest_color(Rgb c) {
    std::size_t best = 0;
    long best_d = -1;
    for (std::size_t i = 0; i < kPalette.size(); ++i) {
        const Rgb p = kPalette[i].rgb;
        const long d = (long(c.r) - p.r) * (long(c.r) - p.r) + (long(c.g) - p.g) * (long(c.g) - p.g) +
                       (long(c.b) - p.b) * (long(c.b) - p.b);
        if (best_d < 0 || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return kPalette[best].name;
}

/// Reads the cell centres of every frame. Colour names come only from frames
/// whose smaller side is at least 300 px; smaller frames report "unknown".
template <typename FrameRange>
EvidenceFeatures perceive_frames(const FrameRange& frames) {
    EvidenceFeatures f;
    std::vector<double> blank_times;
    for (const TimedFrame& tf : frames) {
        const Image& img = tf.frame.pixels;
        const int res = std::min(img.height(), img.width());
        f.max_resolution = std::max(f.max_resolution, res);
        bool nonblank = false;
        for (int r = 0; r < kGrid; ++r)
            for (int c = 0; c < kGrid; ++c) {
                const Rgb px = img.at((2 * r + 1) * img.height() / (2 * kGrid), (2 * c + 1) * img.width() / (2 * kGrid));
                if (px == kBackground) continue;
                nonblank = true;
                ++f.color_histogram[std::string(res >= kLegibleResolution ? nearest_color(px) : kUnknownColor)];
            }
        const double t = tf.frame.timestamp;
        if (nonblank) {
            if (!f.earliest_nonblank || t < *f.earliest_nonblank) f.earliest_nonblank = t;
        } else {
            blank_times.push_back(t);
            if (!f.latest_blank || t > *f.latest_blank) f.latest_blank = t;
        }
    }
    if (f.earliest_nonblank)
        for (double t : blank_times)
            if (t < *f.earliest_nonblank && (!f.latest_blank_before || t > *f.latest_blank_before))
                f.latest_blank_before = t;
    int best = 0;
    for (const auto& [name, count] : f.color_histogram)
        if (name != kUnknownColor && count > best) {
            best = count;
            f.color = name;
        }
    return f;
}

inline EvidenceFeatures perceive(const EvidenceSet& evidence) { return perceive_frames(evidence.items); }

inline std::vector<TimedFrame> window_frames(const EvidenceWindow& w, bool max_resolution_only) {
    std::vector<TimedFrame> all;
    int best = 0;
    w.for_each_frame([&](const TimedFrame& tf) {
        all.push_back(tf);
        best = std::max(best, std::min(tf.frame.pixels.height(), tf.frame.pixels.width()));
    });
    if (!max_resolution_only) return all;
    std::vector<TimedFrame> top;
    for (auto& tf : all)
        if (std::min(tf.frame.pixels.height(), tf.frame.pixels.width()) == best) top.push_back(std::move(tf));
    return top;
}

/// Answer the evidence supports. The colour comes from the highest-resolution
/// frames only; the onset from every frame, since presence shows at any size.
inline std::optional<std::string> perceived_answer(const EvidenceFeatures& all, const EvidenceFeatures& top,
                                                   TaskKind kind) {
    if (kind == TaskKind::temporal) {
        if (!all.earliest_nonblank) return std::nullopt;
        return std::to_string(std::lround(*all.earliest_nonblank));
    }
    return top.color;
}

} // namespace framemind::toy
