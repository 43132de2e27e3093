#pragma once

// Minimal delimited-text reader: comma separated, '#' comment lines, one
// header row. Values are integers or reals; errors carry file and line.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "colldiff/errors.hpp"

namespace colldiff::detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvFile {
  std::vector<std::string> comments;  // text after '#', trimmed
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvFile read_csv(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  CsvFile file;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      file.comments.push_back(trim(std::string_view(t).substr(1)));
      continue;
    }
    auto fields = split_fields(t);
    if (!have_header) {
      if (fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": expected header '" + want + "'");
      }
      file.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected " + std::to_string(expected_header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    file.rows.push_back({lineno, std::move(fields)});
  }
  if (!have_header) {
    throw ParseError(path.string() + ": missing header row");
  }
  return file;
}

inline long long parse_int(const std::string& text, const std::filesystem::path& path,
                           std::size_t line, const std::string& field) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": field '" +
                     field + "' is not an integer: '" + text + "'");
  }
  return value;
}

inline double parse_real(const std::string& text, const std::filesystem::path& path,
                         std::size_t line, const std::string& field) {
  double value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": field '" +
                     field + "' is not a number: '" + text + "'");
  }
  return value;
}

// Shortest round-trip text for a double.
inline std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace colldiff::detail
