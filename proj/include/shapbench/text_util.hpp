#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shapbench {

// Locale-independent decimal rendering with 17 significant digits; enough to
// round-trip any double exactly and stable byte-for-byte across runs.
std::string format_g17(double value);

// Shortest decimal form that round-trips the exact double.
std::string format_shortest(double value);

double parse_double(std::string_view text, const std::string& context);

std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::vector<std::string> split_on(std::string_view text, char sep);
std::string to_lower(std::string_view text);

// FNV-1a 64-bit, used for config/dataset/report fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace shapbench
