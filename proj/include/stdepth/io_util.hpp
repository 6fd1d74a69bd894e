#pragma once

#include <string>

namespace stdepth {

// Whole-file read; throws std::runtime_error with the path on failure.
std::string read_file(const std::string& path);

// Write-to-temp + rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& bytes);

}  // namespace stdepth
