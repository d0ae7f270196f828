#include "latprobe/util/tsv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "latprobe/error.hpp"

namespace latprobe::util {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

TsvTable read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::schema, "cannot open " + path.string());
  TsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail(ErrorKind::schema, path.string() + ": line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    table.rows.push_back({lineno, std::move(fields)});
  }
  require(have_header, ErrorKind::schema, path.string() + ": missing header line");
  return table;
}

void expect_header(const TsvTable& t, const std::vector<std::string>& expected,
                   const std::filesystem::path& path, bool allow_extra) {
  bool ok = t.header.size() >= expected.size() && (allow_extra || t.header.size() == expected.size());
  for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = t.header[i] == expected[i];
  if (!ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : "\\t") + e;
    fail(ErrorKind::schema, path.string() + ": header must be '" + want + "'");
  }
}

double parse_double(std::string_view field, std::size_t line, std::string_view what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(ErrorKind::schema, "line " + std::to_string(line) + ": " + std::string(what) +
                                " is not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    fail(ErrorKind::schema,
         "line " + std::to_string(line) + ": " + std::string(what) + " is not finite");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view field, std::size_t line, std::string_view what) {
  std::uint64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(ErrorKind::schema, "line " + std::to_string(line) + ": " + std::string(what) +
                                " is not a non-negative integer: '" + std::string(field) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace latprobe::util
