#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace latprobe::util {

struct TsvRow {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

struct TsvTable {
  std::vector<std::string> header;
  std::vector<TsvRow> rows;
};

/// Reads a tab-separated file with a header line. Blank lines are skipped and
/// a trailing '\r' is stripped. Every data row must have header.size() fields.
TsvTable read_tsv(const std::filesystem::path& path);

/// Throws a schema error unless the header starts with `expected` (extra
/// trailing columns allowed only when `allow_extra`).
void expect_header(const TsvTable& t, const std::vector<std::string>& expected,
                   const std::filesystem::path& path, bool allow_extra = false);

std::vector<std::string> split(std::string_view s, char sep);

double parse_double(std::string_view field, std::size_t line, std::string_view what);
std::uint64_t parse_u64(std::string_view field, std::size_t line, std::string_view what);

/// Shortest representation that round-trips (std::to_chars).
std::string format_double(double v);

}  // namespace latprobe::util
