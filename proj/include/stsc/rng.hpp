#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace stsc {

// Deterministic RNG used everywhere the simulation draws randomness.  All
// distribution transforms are implemented here (instead of <random>'s
// distribution objects) so that streams are reproducible bit-for-bit across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // standard normal via Box-Muller, second value cached
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang, with the alpha<1 boost
  double gamma(double shape);

  // symmetric Dirichlet(alpha) over out.size() categories
  void dirichlet(double alpha, std::span<double> out);

  // uniform integer in [0, n), unbiased (rejection sampling)
  std::uint64_t uniform_int(std::uint64_t n);

  // Fisher-Yates; std::shuffle is avoided because its draw sequence is
  // implementation defined
  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = uniform_int(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Stable seed derivation for independent streams: hashes (base, domain, index)
// with FNV-1a and finishes with a splitmix64 mix.
std::uint64_t derive_seed(std::uint64_t base, std::string_view domain, std::uint64_t index = 0);

}  // namespace stsc
