// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "framemind/image.hpp"

namespace framemind {

inline Image read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        png_image_free(&img);
        throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
    }
    return Image(static_cast<int>(img.height), static_cast<int>(img.width), std::move(rgb));
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.bytes().data(), 0, nullptr))
        throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
}

} // namespace framemind
