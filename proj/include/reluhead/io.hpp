#pragma once

#include <filesystem>
#include <string>

namespace reluhead {

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);
/// FNV-1a 64-bit checksum as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace reluhead
