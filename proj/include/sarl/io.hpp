#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace sarl {

// Shortest text that parses back to the same double; "nan" for NaN.
std::string format_double(double v);

// Writes to path.tmp and renames over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

// 64-bit FNV-1a, used to fingerprint output files.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace sarl
