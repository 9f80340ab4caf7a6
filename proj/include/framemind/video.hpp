// SPDX-License-Identifier: Apache-2.0
#pragma once

// Video source abstraction. A source is a fixed-rate sequence of frames
// reachable through an accessor; it never changes after construction.
//
// On disk a video is a directory holding manifest.json and PNG frames:
//   {"id": ..., "fps": ..., "duration_seconds": ..., "frames": ["frames/<hash>.png", ...]}
// Frame files are content addressed, so identical frames share one file.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "framemind/hash.hpp"
#include "framemind/image.hpp"
#include "framemind/png_io.hpp"

namespace framemind {

struct Frame {
    Image pixels;
    double timestamp = 0.0; // seconds, of the source frame
    std::size_t index = 0;  // source frame index
};

/// Evidence item: a frame plus the time at which it was requested.
struct TimedFrame {
    Frame frame;
    double timestamp = 0.0;
};

class VideoSource {
public:
    using Accessor = std::function<Image(std::size_t)>;

    VideoSource(std::string id, double duration, double fps, Accessor accessor)
        : id_(std::move(id)), duration_(duration), fps_(fps), accessor_(std::move(accessor)) {
        if (!(duration >= 0.0) || !std::isfinite(duration)) throw std::invalid_argument("video duration must be >= 0");
        if (!(fps > 0.0) || !std::isfinite(fps)) throw std::invalid_argument("video fps must be > 0");
        // Tolerate representation error such as 4.35 * 100 = 434.99999999999994.
        frame_count_ = static_cast<std::size_t>(std::floor(duration * fps + 1e-9));
        if (frame_count_ < 1) throw std::invalid_argument("video must contain at least one frame");
        if (!accessor_) throw std::invalid_argument("video accessor is empty");
    }

    const std::string& id() const { return id_; }
    double duration() const { return duration_; }
    double fps() const { return fps_; }
    std::size_t frame_count() const { return frame_count_; }

    double frame_timestamp(std::size_t index) const { return static_cast<double>(index) / fps_; }

    Frame frame(std::size_t index) const {
        if (index >= frame_count_) throw std::out_of_range("frame index out of range");
        return Frame{accessor_(index), frame_timestamp(index), index};
    }

    /// Index of the frame on screen at time t (the last one from its end on).
    std::size_t index_at(double t) const {
        if (t <= 0.0) return 0;
        const auto i = static_cast<std::size_t>(std::floor(t * fps_ + 1e-9));
        return std::min(i, frame_count_ - 1);
    }

    /// Index of the frame whose timestamp is closest to t; ties go to the earlier frame.
    std::size_t nearest_index(double t) const {
        if (t <= 0.0) return 0;
        const double last = frame_timestamp(frame_count_ - 1);
        if (t >= last) return frame_count_ - 1;
        auto lo = static_cast<std::size_t>(std::floor(t * fps_));
        lo = std::min(lo, frame_count_ - 1);
        // t * fps may land just below an integer; check the neighbours explicitly.
        std::size_t best = lo;
        double best_dist = std::abs(frame_timestamp(lo) - t);
        for (std::size_t cand : {lo > 0 ? lo - 1 : lo, lo + 1}) {
            if (cand >= frame_count_) continue;
            const double d = std::abs(frame_timestamp(cand) - t);
            if (d < best_dist || (d == best_dist && cand < best)) {
                best = cand;
                best_dist = d;
            }
        }
        return best;
    }

private:
    std::string id_;
    double duration_;
    double fps_;
    std::size_t frame_count_ = 0;
    Accessor accessor_;
};

struct Manifest {
    std::string id;
    double fps = 1.0;
    double duration_seconds = 0.0;
    std::vector<std::string> frames;
};

inline void to_json(nlohmann::json& j, const Manifest& m) {
    j = nlohmann::json{{"id", m.id}, {"fps", m.fps}, {"duration_seconds", m.duration_seconds}, {"frames", m.frames}};
}

inline void from_json(const nlohmann::json& j, Manifest& m) {
    j.at("id").get_to(m.id);
    j.at("fps").get_to(m.fps);
    j.at("duration_seconds").get_to(m.duration_seconds);
    j.at("frames").get_to(m.frames);
}

inline Manifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
    try {
        return nlohmann::json::parse(in).get<Manifest>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("bad manifest " + manifest_path.string() + ": " + e.what());
    }
}

/// Loads every referenced frame once; duplicate paths share a decoded image.
inline VideoSource load_video(const std::filesystem::path& manifest_path) {
    const Manifest m = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::map<std::string, Image> decoded;
    auto frames = std::make_shared<std::vector<Image>>();
    frames->reserve(m.frames.size());
    for (const auto& rel : m.frames) {
        auto it = decoded.find(rel);
        if (it == decoded.end()) it = decoded.emplace(rel, read_png(base / rel)).first;
        frames->push_back(it->second);
    }
    VideoSource source(m.id, m.duration_seconds, m.fps, [frames](std::size_t i) { return frames->at(i); });
    if (source.frame_count() != frames->size())
        throw std::runtime_error("manifest " + manifest_path.string() + " lists " + std::to_string(frames->size()) +
                                 " frames, expected " + std::to_string(source.frame_count()));
    return source;
}

/// Writes `dir/manifest.json` plus content-addressed PNGs under `dir/frames/`.
inline Manifest write_video(const std::filesystem::path& dir, const VideoSource& source) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "frames");
    Manifest m{source.id(), source.fps(), source.duration(), {}};
    std::map<const void*, std::string> written;
    std::vector<Image> pinned; // keeps buffer ids unique while `written` refers to them
    for (std::size_t i = 0; i < source.frame_count(); ++i) {
        const Image img = source.frame(i).pixels;
        pinned.push_back(img);
        auto it = written.find(img.buffer_id());
        if (it == written.end()) {
            const std::string rel = "frames/" + hex64(fnv1a64(img.bytes())) + ".png";
            if (!fs::exists(dir / rel)) write_png(dir / rel, img);
            it = written.emplace(img.buffer_id(), rel).first;
        }
        m.frames.push_back(it->second);
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << nlohmann::json(m).dump(2) << '\n';
    return m;
}

} // namespace framemind
