// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdio>
#include <string_view>

#include <fmt/format.h>

namespace framemind::log {

enum class Level { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::info};
    return level;
}

inline void set_level(Level level) { threshold().store(level); }

template <typename... Args>
void write(Level level, std::string_view tag, fmt::format_string<Args...> format, Args&&... args) {
    if (level < threshold().load()) return;
    fmt::print(stderr, "[{}] {}\n", tag, fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::info, "info", format, std::forward<Args>(args)...);
}

template <typename... Args>
void warning(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::warning, "warn", format, std::forward<Args>(args)...);
}

template <typename... Args>
void error(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::error, "error", format, std::forward<Args>(args)...);
}

} // namespace framemind::log
