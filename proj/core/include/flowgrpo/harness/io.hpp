#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace flowgrpo {

// Whole-file read; IoError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it over `path`, so readers never observe a
// half-written file.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace flowgrpo
