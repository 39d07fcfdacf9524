#pragma once

#include <sstream>
#include <string>

namespace cngcf::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, quiet = 4 };

// Threshold comes from the CNGCF_LOG environment variable
// (debug|info|warn|error|quiet), read once. Default: info.
Level threshold();
void set_threshold(Level level);

void emit(Level level, const std::string& message);

namespace detail {
template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream out;
    (out << ... << args);
    return out.str();
}
}  // namespace detail

template <typename... Args>
void debug(Args&&... args) {
    if (threshold() <= Level::debug) emit(Level::debug, detail::cat(std::forward<Args>(args)...));
}
template <typename... Args>
void info(Args&&... args) {
    if (threshold() <= Level::info) emit(Level::info, detail::cat(std::forward<Args>(args)...));
}
template <typename... Args>
void warn(Args&&... args) {
    if (threshold() <= Level::warn) emit(Level::warn, detail::cat(std::forward<Args>(args)...));
}
template <typename... Args>
void error(Args&&... args) {
    if (threshold() <= Level::error) emit(Level::error, detail::cat(std::forward<Args>(args)...));
}

}  // namespace cngcf::log
