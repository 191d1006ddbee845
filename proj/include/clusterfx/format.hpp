#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace clusterfx {

// Shortest round-trip decimal form; identical bytes on every run. Integral
// values print without an exponent (100000, not 1e+05).
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  if (x == std::trunc(x) && std::abs(x) < 1e15) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(x));
    return std::string(buf, res.ptr);
  }
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace clusterfx
