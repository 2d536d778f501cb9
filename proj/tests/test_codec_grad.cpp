#include <doctest.h>

#include <cmath>
#include <vector>

#include "stsc/codec.hpp"
#include "stsc/rng.hpp"

using namespace stsc;

namespace {

double loss_at(const Codec<double>& codec, const std::vector<double>& img, int batch,
               const std::vector<double>& params, const std::vector<double>& target,
               Workspace<double>& ws) {
  const auto& cfg = codec.config();
  std::vector<double> sym(static_cast<std::size_t>(batch) * cfg.n_real());
  std::vector<double> out(img.size());
  codec.encode(img.data(), batch, params.data(), sym.data(), ws);
  codec.decode(sym.data(), batch, params.data(), out.data(), ws);
  double l = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double d = out[i] - target[i];
    l += 0.5 * d * d;
  }
  return l;
}

void check_gradients(CodecConfig cfg, int batch, std::uint64_t seed) {
  Codec<double> codec(cfg);
  auto pack = codec.make_params();
  codec.init_params(pack, seed);
  Rng rng(derive_seed(seed, "data"));
  std::vector<double> img(static_cast<std::size_t>(batch) * cfg.pixels());
  std::vector<double> target(img.size());
  for (auto& v : img) v = rng.uniform01();
  for (auto& v : target) v = rng.uniform01();

  Workspace<double> ws;
  std::vector<double> sym(static_cast<std::size_t>(batch) * cfg.n_real());
  std::vector<double> out(img.size());
  codec.encode(img.data(), batch, pack.data.data(), sym.data(), ws);
  codec.decode(sym.data(), batch, pack.data.data(), out.data(), ws);

  std::vector<double> d_images(img.size());
  for (std::size_t i = 0; i < out.size(); ++i) d_images[i] = out[i] - target[i];
  std::vector<double> grad(pack.layout->total(), 0.0);
  std::vector<double> d_sym(sym.size());
  std::vector<double> d_input(img.size());
  codec.decode_backward(d_images.data(), batch, pack.data.data(), d_sym.data(), grad.data(), ws);
  codec.encode_backward(d_sym.data(), batch, pack.data.data(), d_input.data(), grad.data(), ws);

  // parameter gradients accumulate across backward calls
  {
    std::vector<double> grad2 = grad;
    codec.decode_backward(d_images.data(), batch, pack.data.data(), d_sym.data(), grad2.data(),
                          ws);
    codec.encode_backward(d_sym.data(), batch, pack.data.data(), nullptr, grad2.data(), ws);
    for (std::size_t i = 0; i < grad.size(); ++i)
      REQUIRE(grad2[i] == doctest::Approx(2.0 * grad[i]).epsilon(1e-9).scale(1e-12));
  }

  // fourth-order central differences at a small step: bias perturbations move
  // every token at once and the power normalization has huge high-order terms
  // at init, so coarser stencils pick up pure truncation error (verified to
  // vanish as eps -> 0)
  const double eps = 1e-6;
  auto fd_check = [&](double analytic, double* slot, const std::string& what) {
    double save = *slot;
    auto at = [&](double delta) {
      *slot = save + delta;
      return loss_at(codec, img, batch, pack.data, target, ws);
    };
    double fd =
        (-at(2 * eps) + 8 * at(eps) - 8 * at(-eps) + at(-2 * eps)) / (12 * eps);
    *slot = save;
    INFO(what << " analytic=" << analytic << " fd=" << fd);
    CHECK(std::abs(analytic - fd) <= 5e-7 + 2e-4 * std::abs(fd));
  };

  Rng pick(derive_seed(seed, "pick"));
  for (const auto& a : pack.layout->arrays()) {
    int probes = a.size <= 4 ? static_cast<int>(a.size) : 4;
    for (int p = 0; p < probes; ++p) {
      std::int64_t idx = p == 0 ? 0
                       : p == 1 ? a.size - 1
                                : static_cast<std::int64_t>(pick.uniform_int(
                                      static_cast<std::uint64_t>(a.size)));
      fd_check(grad[a.offset + idx], &pack.data[a.offset + idx],
               a.name + "[" + std::to_string(idx) + "]");
    }
  }
  for (int p = 0; p < 12; ++p) {
    std::size_t idx = pick.uniform_int(img.size());
    fd_check(d_input[idx], &img[idx], "input pixel " + std::to_string(idx));
  }
}

}  // namespace

TEST_CASE("gradients match finite differences on a degenerate-window codec") {
  CodecConfig cfg;
  cfg.h = cfg.w = 8;
  cfg.c = 4;
  cfg.heads = 1;
  cfg.window = 4;
  cfg.mlp_ratio = 2;
  check_gradients(cfg, 2, 17);
}

TEST_CASE("gradients match finite differences with multiple masked windows") {
  CodecConfig cfg;
  cfg.h = cfg.w = 16;
  cfg.c = 6;
  cfg.heads = 3;
  cfg.window = 2;
  cfg.mlp_ratio = 2;
  check_gradients(cfg, 2, 29);
}
