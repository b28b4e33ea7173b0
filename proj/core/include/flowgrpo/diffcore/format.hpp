#pragma once

#include <charconv>
#include <string>

namespace flowgrpo {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

}  // namespace flowgrpo
