#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mmr {

/// Writes `contents` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal form that round-trips to the same double ("%.17g"
/// precision); non-finite values print as inf/-inf/nan.
std::string format_double(double v);

}  // namespace mmr
