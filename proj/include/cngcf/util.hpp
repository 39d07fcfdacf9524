#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cngcf {

/// Shortest round-trip decimal form of a double (std::to_chars). All numeric
/// text the library emits goes through this so repeated runs are
/// byte-identical and re-parsing is lossless.
std::string format_double(double value);

/// Strict double parse; throws DataError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);

/// Strict nonnegative integer parse; throws DataError naming `context`.
std::uint64_t parse_uint(std::string_view text, std::string_view context);

std::uint64_t fnv1a_hash(std::string_view text);
std::string hash_hex(std::uint64_t hash);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cngcf
