#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wmprobe {

/// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);

/// Strict parse of a full field; throws ConfigError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long parse_long(std::string_view text, std::string_view what);

/// Minimal CSV: comma separated, no quoting (fields never contain commas).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace wmprobe
