#include "cngcf/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace cngcf::log {

namespace {

Level parse_level(const char* text) {
    if (text == nullptr) return Level::info;
    const std::string value{text};
    if (value == "debug") return Level::debug;
    if (value == "info") return Level::info;
    if (value == "warn") return Level::warn;
    if (value == "error") return Level::error;
    if (value == "quiet") return Level::quiet;
    return Level::info;
}

Level& threshold_ref() {
    static Level level = parse_level(std::getenv("CNGCF_LOG"));
    return level;
}

const char* tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        default: return "?";
    }
}

}  // namespace

Level threshold() { return threshold_ref(); }

void set_threshold(Level level) { threshold_ref() = level; }

void emit(Level level, const std::string& message) {
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    std::cerr << "[cngcf " << tag(level) << "] " << message << '\n';
}

}  // namespace cngcf::log
