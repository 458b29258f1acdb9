#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wmprobe {

/// Decodes UTF-8; throws ConfigError on malformed input.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t code_point);

/// Reads a charset file: UTF-8, one code point per line. Blank lines are
/// skipped; a line holding more than one code point is rejected.
std::vector<char32_t> load_charset(const std::filesystem::path& path);

}  // namespace wmprobe
