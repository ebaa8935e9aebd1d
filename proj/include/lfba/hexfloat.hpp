#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include "lfba/error.hpp"

namespace lfba {

// C99 hexadecimal floating literal ("0x1.8p-1"); exact for every finite double.
inline std::string to_hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double from_hexfloat(std::string_view text) {
  const std::string owned(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(owned.c_str(), &end);
  if (owned.empty() || end != owned.c_str() + owned.size() || errno == ERANGE) {
    throw ParseError("bad floating value \"" + owned + "\"");
  }
  return v;
}

}  // namespace lfba
