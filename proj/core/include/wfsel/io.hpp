#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wfsel {

// Writes to a sibling temporary file and renames it over `path`, so readers
// never see a partial file. Creates missing parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Shortest decimal that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace wfsel
