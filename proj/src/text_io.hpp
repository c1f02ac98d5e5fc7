#pragma once

// Line-oriented text helpers shared by the dataset, checkpoint and metrics
// readers. Doubles are written in shortest round-trip form, so a write/read
// cycle is bit-exact.

#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cfassign/errors.hpp"

namespace cfa::text {

inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view token) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by some writers
    if (token == "nan" || token == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (token == "inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    throw SchemaError("not a number: '" + std::string(token) + "'");
  }
  return value;
}

template <typename Int>
Int parse_int(std::string_view token) {
  Int value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw SchemaError("not an integer: '" + std::string(token) + "'");
  }
  return value;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

/// Reads "key=value" header lines. Throws SchemaError on a missing line or a
/// key mismatch.
inline std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("unexpected end of file, expected '" + key + "'");
  auto eq = line.find('=');
  if (eq == std::string::npos || line.substr(0, eq) != key) {
    throw SchemaError("expected '" + key + "=...', got '" + line + "'");
  }
  return line.substr(eq + 1);
}

}  // namespace cfa::text
