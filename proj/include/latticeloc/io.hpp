#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace latticeloc {

/// Writes to a temporary sibling file and renames it over `path`.
/// Throws Error("io") on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws Error("io") when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

} // namespace latticeloc
