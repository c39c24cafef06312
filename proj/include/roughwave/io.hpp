#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace roughwave::io {

// Writes to "<path>.tmp" and renames over path, so readers never observe a
// partially written file. Throws IoError.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

// Shortest decimal that round-trips; used for every CSV and JSON number so
// that identical runs produce identical bytes.
std::string format_double(double v);

}  // namespace roughwave::io
