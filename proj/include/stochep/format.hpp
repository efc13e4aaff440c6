#pragma once

#include <cstdio>
#include <string>

namespace stochep {

/// Round-trip (17 significant digits) text for a double; used for every CSV/JSON number so
/// identical runs produce identical bytes.
inline std::string fmt_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace stochep
