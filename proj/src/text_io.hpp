#pragma once

// Line-oriented helpers shared by the plain-text readers.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sgdetect/errors.hpp"

namespace sgdetect::detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last;
}

inline double to_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  if (!parse_number(tok, v)) throw ParseError(where + ": not a number: '" + std::string(tok) + "'");
  return v;
}

inline long long to_integer(std::string_view tok, const std::string& where) {
  long long v = 0;
  if (!parse_number(tok, v)) throw ParseError(where + ": not an integer: '" + std::string(tok) + "'");
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace sgdetect::detail
