#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab::io {

// Shortest decimal string that parses back to the identical double.
std::string format_double(double value);

// Strict full-string parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view strip_cr(std::string_view line);
std::string_view trim(std::string_view text);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace driftlab::io
