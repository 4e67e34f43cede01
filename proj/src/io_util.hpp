#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "adapt/error.hpp"

namespace adapt::detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("FileNotFound", "cannot open input file: " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoError", "cannot open output file: " + path);
  return out;
}

// Shortest round-trip decimal representation; infinity prints as "inf".
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double_or_inf(const std::string& s, const std::string& context) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail("ParseError", context + ": bad number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& context) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail("ParseError", context + ": bad integer '" + s + "'");
  return v;
}

}  // namespace adapt::detail
