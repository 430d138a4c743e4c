#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace webdvfs {

/// Shortest round-trip decimal representation of a double.
std::string format_real(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
double parse_real(std::string_view s);

}  // namespace webdvfs
