// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dynamic-resolution frame sampling: a ladder of G sampling configurations
// interpolated between a many-frames/low-res endpoint (rung 1) and a
// few-frames/high-res endpoint (rung G).

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "framemind/video.hpp"
#include "framemind/videotool.hpp"

namespace framemind {

struct SamplingShape {
    int frames = 1;
    int height = 1;
    int width = 1;
    friend bool operator==(const SamplingShape&, const SamplingShape&) = default;
};

struct LadderEndpoints {
    SamplingShape low{64, 224, 224};
    SamplingShape high{32, 448, 448};

    void validate() const {
        if (!(low.frames >= high.frames && high.frames >= 1))
            throw std::invalid_argument("ladder endpoints need N_low >= N_high >= 1");
        if (!(high.height >= low.height && low.height >= 1) || !(high.width >= low.width && low.width >= 1))
            throw std::invalid_argument("ladder endpoints need high size >= low size >= 1");
    }
};

struct SamplingConfig {
    int rung = 1; // 1-based
    double weight = 0.0;
    int frames = 1;
    int height = 1;
    int width = 1;

    SamplingShape shape() const { return {frames, height, width}; }
    friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

inline std::vector<SamplingConfig> build_ladder(const LadderEndpoints& ends, int rungs) {
    if (rungs < 2) throw std::invalid_argument("ladder needs at least 2 rungs");
    ends.validate();
    // Exact rational arithmetic: (lo*(G-g) + hi*(g-1)) / (G-1), halves up. A
    // floating-point r can land a tie at x.4999... and round it the wrong way.
    auto lerp = [rungs](int lo, int hi, int g) {
        const long long num = static_cast<long long>(lo) * (rungs - g) + static_cast<long long>(hi) * (g - 1);
        const long long den = rungs - 1;
        return std::max(1, static_cast<int>((2 * num + den) / (2 * den)));
    };
    std::vector<SamplingConfig> ladder;
    ladder.reserve(static_cast<std::size_t>(rungs));
    for (int g = 1; g <= rungs; ++g) {
        const double r = static_cast<double>(g - 1) / (rungs - 1);
        SamplingConfig c{g, r, lerp(ends.low.frames, ends.high.frames, g), lerp(ends.low.height, ends.high.height, g),
                         lerp(ends.low.width, ends.high.width, g)};
        // Endpoints are taken verbatim so no rounding can disturb them.
        if (g == 1) std::tie(c.frames, c.height, c.width) = std::tuple(ends.low.frames, ends.low.height, ends.low.width);
        if (g == rungs)
            std::tie(c.frames, c.height, c.width) = std::tuple(ends.high.frames, ends.high.height, ends.high.width);
        ladder.push_back(c);
    }
    return ladder;
}

inline nlohmann::json ladder_to_json(const std::vector<SamplingConfig>& ladder) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : ladder)
        out.push_back({{"g", c.rung}, {"r", c.weight}, {"N", c.frames}, {"H", c.height}, {"W", c.width}});
    return out;
}

enum class EvidenceOrigin { initial_uniform, tool };

struct EvidenceSet {
    std::vector<TimedFrame> items;
    EvidenceOrigin origin = EvidenceOrigin::tool;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

/// N frames at evenly spaced times over [0, duration] (midpoint when N = 1),
/// each resized to H x W. Each time takes the frame on screen at that
/// instant, so N = frame_count walks every frame once.
inline EvidenceSet initial_evidence(const VideoSource& source, const SamplingConfig& config) {
    if (source.frame_count() < 1) throw std::invalid_argument("video has no frames");
    if (config.frames < 1 || config.height < 1 || config.width < 1)
        throw std::invalid_argument("sampling config must be positive");
    EvidenceSet out{{}, EvidenceOrigin::initial_uniform};
    out.items.reserve(static_cast<std::size_t>(config.frames));
    // Sources often repeat frames; resize each distinct buffer once.
    std::map<const void*, Image> resized;
    std::vector<Image> pinned; // source buffers stay alive so their ids stay unique
    for (double t : uniform_times(0.0, source.duration(), config.frames)) {
        Frame f = source.frame(source.index_at(t));
        pinned.push_back(f.pixels);
        auto it = resized.find(f.pixels.buffer_id());
        if (it == resized.end())
            it = resized.emplace(f.pixels.buffer_id(), resize_nearest(f.pixels, config.height, config.width)).first;
        out.items.push_back(TimedFrame{Frame{it->second, f.timestamp, f.index}, t});
    }
    return out;
}

} // namespace framemind
