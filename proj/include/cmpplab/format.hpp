#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace cmpplab {

/// Shortest round-trip decimal form of a double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace cmpplab
