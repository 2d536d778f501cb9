#include "stsc/common.hpp"

#include <array>
#include <cstdio>

namespace stsc {

std::string format_bytes(std::uint64_t n) {
  static constexpr std::array<const char*, 5> unit = {"B", "KiB", "MiB", "GiB", "TiB"};
  double v = static_cast<double>(n);
  std::size_t u = 0;
  while (v >= 1024.0 && u + 1 < unit.size()) {
    v /= 1024.0;
    ++u;
  }
  char buf[32];
  if (u == 0)
    std::snprintf(buf, sizeof buf, "%llu B", static_cast<unsigned long long>(n));
  else
    std::snprintf(buf, sizeof buf, "%.2f %s", v, unit[u]);
  return buf;
}

}  // namespace stsc
