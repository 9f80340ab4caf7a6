// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "framemind/image.hpp"
#include "framemind/video.hpp"

namespace testing_support {

/// Solid frames whose colour encodes the frame index.
inline framemind::Image index_image(std::size_t i, int h = 6, int w = 8) {
    return framemind::Image(h, w, framemind::Rgb{static_cast<std::uint8_t>(i & 0xff),
                                                 static_cast<std::uint8_t>((i >> 8) & 0xff), 99});
}

inline std::size_t decode_index(const framemind::Image& img) {
    const auto c = img.at(0, 0);
    return static_cast<std::size_t>(c.r) | (static_cast<std::size_t>(c.g) << 8);
}

inline framemind::VideoSource index_source(double duration = 60.0, double fps = 1.0, int h = 6, int w = 8,
                                           std::string id = "src") {
    return framemind::VideoSource(std::move(id), duration, fps, [h, w](std::size_t i) { return index_image(i, h, w); });
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("framemind_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace testing_support
