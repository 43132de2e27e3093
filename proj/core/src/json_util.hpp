#pragma once

// Small helpers for reading nlohmann::json documents with field-path context
// in error messages. Private to the library.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "colldiff/errors.hpp"
#include "json.hpp"

namespace colldiff::detail {

using Json = nlohmann::json;

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline const Json& require(const Json& obj, const char* key,
                           const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(where + ": missing required field '" + key + "'");
  }
  return *it;
}

template <typename T>
T get_as(const Json& value, const std::string& where) {
  try {
    return value.get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline long long get_integer(const Json& value, const std::string& where) {
  if (!value.is_number_integer()) {
    throw ParseError(where + ": expected an integer");
  }
  return value.get<long long>();
}

inline double get_number(const Json& value, const std::string& where) {
  if (!value.is_number()) throw ParseError(where + ": expected a number");
  return value.get<double>();
}

inline const Json& require_array(const Json& obj, const char* key,
                                 const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_array()) {
    throw ParseError(where + ": field '" + key + "' must be an array");
  }
  return v;
}

}  // namespace colldiff::detail
