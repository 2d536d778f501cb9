#include "stsc/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

#include "kernels_detail.hpp"
#include "stsc/common.hpp"

namespace stsc::kernels {
namespace {

struct Tables {
  Ops<float> f;
  Ops<double> d;
};

const Tables& scalar_tables() {
  static const Tables t = [] {
    Tables x;
    detail::fill_scalar(x.f);
    detail::fill_scalar(x.d);
    return x;
  }();
  return t;
}

const Tables& avx2_tables() {
  static const Tables t = [] {
    Tables x = scalar_tables();
    detail::fill_avx2(x.f);
    detail::fill_avx2(x.d);
    return x;
  }();
  return t;
}

const Tables& avx512_tables() {
  static const Tables t = [] {
    Tables x = avx2_tables();
    detail::fill_avx512(x.f);
    detail::fill_avx512(x.d);
    return x;
  }();
  return t;
}

const Tables& tables_for(Backend b) {
  switch (b) {
    case Backend::scalar: return scalar_tables();
    case Backend::avx2: return avx2_tables();
    case Backend::avx512: return avx512_tables();
  }
  throw std::logic_error("bad backend");
}

Backend g_active = [] { return detect_backend(); }();

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Backend::avx512: return __builtin_cpu_supports("avx512f");
  }
  return false;
}

Backend detect_backend() {
  if (const char* env = std::getenv("STSC_KERNEL_BACKEND")) {
    std::string s(env);
    Backend b;
    if (s == "scalar")
      b = Backend::scalar;
    else if (s == "avx2")
      b = Backend::avx2;
    else if (s == "avx512")
      b = Backend::avx512;
    else
      throw config_error("STSC_KERNEL_BACKEND must be scalar|avx2|avx512, got: " + s);
    require(backend_supported(b), "requested kernel backend not supported on this cpu: " + s);
    return b;
  }
  if (backend_supported(Backend::avx512)) return Backend::avx512;
  if (backend_supported(Backend::avx2)) return Backend::avx2;
  return Backend::scalar;
}

void select_backend(Backend b) {
  require(backend_supported(b), "kernel backend not supported on this cpu: " + backend_name(b));
  g_active = b;
}

Backend active_backend() { return g_active; }

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::avx512: return "avx512";
  }
  return "?";
}

template <>
const Ops<float>& ops<float>() {
  return tables_for(g_active).f;
}

template <>
const Ops<double>& ops<double>() {
  return tables_for(g_active).d;
}

template <>
const Ops<float>& ops_for<float>(Backend b) {
  require(backend_supported(b), "kernel backend not supported on this cpu: " + backend_name(b));
  return tables_for(b).f;
}

template <>
const Ops<double>& ops_for<double>(Backend b) {
  require(backend_supported(b), "kernel backend not supported on this cpu: " + backend_name(b));
  return tables_for(b).d;
}

}  // namespace stsc::kernels
