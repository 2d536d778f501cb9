#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stsc {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// require() is for validating external inputs (configs, files, CLI); it must
// stay active in release builds, unlike assert().
template <typename E = config_error>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

std::string format_bytes(std::uint64_t n);

}  // namespace stsc
