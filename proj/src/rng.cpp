#include "stsc/rng.hpp"

#include <cmath>
#include <numbers>

#include "stsc/common.hpp"

namespace stsc {

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // u1 in (0, 1] so the log is finite
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

double Rng::gamma(double shape) {
  require<numeric_error>(shape > 0.0, "gamma shape must be positive");
  if (shape < 1.0) {
    // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    double u = 1.0 - uniform01();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = 1.0 - uniform01();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void Rng::dirichlet(double alpha, std::span<double> out) {
  double sum = 0.0;
  for (auto& x : out) {
    x = gamma(alpha);
    sum += x;
  }
  if (sum <= 0.0) {
    // all-zero draw is possible in principle for tiny alpha; fall back to
    // a uniform vector rather than dividing by zero
    double p = 1.0 / static_cast<double>(out.size());
    for (auto& x : out) x = p;
    return;
  }
  for (auto& x : out) x /= sum;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  require<numeric_error>(n > 0, "uniform_int needs n > 0");
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view domain, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix_byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ull;
  };
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(base >> (8 * i)));
  for (char c : domain) mix_byte(static_cast<std::uint8_t>(c));
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(index >> (8 * i)));
  return splitmix64(h);
}

}  // namespace stsc
