// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace framemind {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Immutable interleaved RGB raster. Copies share the pixel buffer.
class Image {
public:
    Image() = default;

    Image(int height, int width, Rgb fill = {}) : height_(height), width_(width) {
        if (height < 1 || width < 1) throw std::invalid_argument("image dimensions must be >= 1");
        auto data = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(height) * width * 3);
        for (std::size_t i = 0; i < data->size(); i += 3) {
            (*data)[i] = fill.r;
            (*data)[i + 1] = fill.g;
            (*data)[i + 2] = fill.b;
        }
        data_ = std::move(data);
    }

    Image(int height, int width, std::vector<std::uint8_t> rgb) : height_(height), width_(width) {
        if (height < 1 || width < 1) throw std::invalid_argument("image dimensions must be >= 1");
        if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
            throw std::invalid_argument("pixel buffer size does not match dimensions");
        data_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(rgb));
    }

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return data_ == nullptr; }

    Rgb at(int row, int col) const {
        const std::size_t i = (static_cast<std::size_t>(row) * width_ + col) * 3;
        const auto& d = *data_;
        return Rgb{d[i], d[i + 1], d[i + 2]};
    }

    const std::vector<std::uint8_t>& bytes() const { return *data_; }

    /// Identity of the shared buffer; equal ids imply equal pixels.
    const void* buffer_id() const { return data_.get(); }

    friend bool operator==(const Image& a, const Image& b) {
        if (a.height_ != b.height_ || a.width_ != b.width_) return false;
        if (a.data_ == b.data_) return true;
        if (!a.data_ || !b.data_) return false;
        return *a.data_ == *b.data_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> data_;
};

/// Nearest-neighbour resample: output (r, c) reads source (r*H/h, c*W/w).
inline Image resize_nearest(const Image& src, int height, int width) {
    if (height < 1 || width < 1) throw std::invalid_argument("resize target must be >= 1");
    if (src.height() == height && src.width() == width) return src;

    const auto& in = src.bytes();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * width * 3);
    std::vector<std::size_t> col_offset(static_cast<std::size_t>(width));
    for (int c = 0; c < width; ++c)
        col_offset[static_cast<std::size_t>(c)] =
            static_cast<std::size_t>(static_cast<long long>(c) * src.width() / width) * 3;

    const std::size_t row_bytes = static_cast<std::size_t>(width) * 3;
    int prev_src_row = -1;
    for (int r = 0; r < height; ++r) {
        const int sr = static_cast<int>(static_cast<long long>(r) * src.height() / height);
        std::uint8_t* dst = out.data() + static_cast<std::size_t>(r) * row_bytes;
        if (sr == prev_src_row) {
            std::copy(dst - row_bytes, dst, dst);
            continue;
        }
        const std::uint8_t* row = in.data() + static_cast<std::size_t>(sr) * src.width() * 3;
        for (int c = 0; c < width; ++c) {
            const std::uint8_t* p = row + col_offset[static_cast<std::size_t>(c)];
            dst[c * 3] = p[0];
            dst[c * 3 + 1] = p[1];
            dst[c * 3 + 2] = p[2];
        }
        prev_src_row = sr;
    }
    return Image(height, width, std::move(out));
}

} // namespace framemind
