#include "stsc/kernels.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "stsc/common.hpp"
#include "stsc/rng.hpp"

using namespace stsc;
using kernels::Backend;

namespace {

std::vector<float> random_vec(Rng& rng, int n, double scale = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return v;
}

std::vector<double> random_vec_d(Rng& rng, int n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// reference products computed in double regardless of T, naive loop order
template <typename T>
std::vector<double> ref_nn(const std::vector<T>& a, const std::vector<T>& b, int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p)
        acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * n + j]);
      c[i * n + j] = acc;
    }
  return c;
}

template <typename T>
std::vector<double> ref_nt(const std::vector<T>& a, const std::vector<T>& b, int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p)
        acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[j * k + p]);
      c[i * n + j] = acc;
    }
  return c;
}

template <typename T>
std::vector<double> ref_tn(const std::vector<T>& a, const std::vector<T>& b, int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p)
        acc += static_cast<double>(a[p * m + i]) * static_cast<double>(b[p * n + j]);
      c[i * n + j] = acc;
    }
  return c;
}

template <typename T>
void check_close(const std::vector<T>& got, const std::vector<double>& want, double atol,
                 double rtol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    double g = got[i];
    CHECK(std::abs(g - want[i]) <= atol + rtol * std::abs(want[i]));
  }
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out = {Backend::scalar};
  if (kernels::backend_supported(Backend::avx2)) out.push_back(Backend::avx2);
  if (kernels::backend_supported(Backend::avx512)) out.push_back(Backend::avx512);
  return out;
}

}  // namespace

TEST_CASE("gemm variants match a naive double-precision oracle on every backend") {
  Rng rng(1234);
  const std::vector<std::array<int, 3>> shapes = {
      {1, 1, 1},   {1, 8, 1},    {2, 3, 5},     {4, 16, 8},    {5, 17, 33},
      {6, 32, 24}, {7, 300, 19}, {32, 48, 32},  {32, 256, 96}, {13, 100, 41},
      {8, 64, 64}, {3, 1, 7},    {32, 128, 1024}};
  for (auto backend : available_backends()) {
    CAPTURE(kernels::backend_name(backend));
    const auto& ops_f = kernels::ops_for<float>(backend);
    const auto& ops_d = kernels::ops_for<double>(backend);
    for (auto [m, k, n] : shapes) {
      CAPTURE(m);
      CAPTURE(k);
      CAPTURE(n);
      auto a = random_vec(rng, m * k);
      auto b_nn = random_vec(rng, k * n);
      auto b_nt = random_vec(rng, n * k);
      auto a_tn = random_vec(rng, k * m);

      std::vector<float> c(static_cast<size_t>(m) * n);
      double atol = 1e-4 * std::sqrt(static_cast<double>(k));
      double rtol = 1e-4;

      ops_f.gemm_nn(a.data(), b_nn.data(), c.data(), m, k, n, false);
      check_close(c, ref_nn(a, b_nn, m, k, n), atol, rtol);

      // accumulate path: run twice, expect doubled result
      ops_f.gemm_nn(a.data(), b_nn.data(), c.data(), m, k, n, true);
      {
        auto want = ref_nn(a, b_nn, m, k, n);
        for (auto& w : want) w *= 2.0;
        check_close(c, want, 2 * atol, rtol);
      }

      ops_f.gemm_nt(a.data(), b_nt.data(), c.data(), m, k, n, false);
      check_close(c, ref_nt(a, b_nt, m, k, n), atol, rtol);

      std::fill(c.begin(), c.end(), 0.f);
      ops_f.gemm_tn_acc(a_tn.data(), b_nn.data(), c.data(), m, k, n);
      check_close(c, ref_tn(a_tn, b_nn, m, k, n), atol, rtol);

      // double lane
      auto ad = random_vec_d(rng, m * k);
      auto bd = random_vec_d(rng, k * n);
      std::vector<double> cd(static_cast<size_t>(m) * n);
      ops_d.gemm_nn(ad.data(), bd.data(), cd.data(), m, k, n, false);
      check_close(cd, ref_nn(ad, bd, m, k, n), 1e-11 * std::sqrt(static_cast<double>(k)), 1e-12);
    }
  }
}

TEST_CASE("strided attention kernels match dense oracles") {
  Rng rng(99);
  const int t = 16, dh = 32, ld = 96;  // rows embedded in a wider token matrix
  auto q = random_vec(rng, t * ld);
  auto k = random_vec(rng, t * ld);
  auto p = random_vec(rng, t * t);
  auto g = random_vec(rng, t * ld);
  const float scale = 0.176777f;

  // dense copies for the oracle
  auto densify = [&](const std::vector<float>& src) {
    std::vector<float> out(t * dh);
    for (int i = 0; i < t; ++i)
      for (int d = 0; d < dh; ++d) out[i * dh + d] = src[i * ld + d];
    return out;
  };
  auto qd = densify(q);
  auto kd = densify(k);
  auto gd = densify(g);

  for (auto backend : available_backends()) {
    CAPTURE(kernels::backend_name(backend));
    const auto& ops = kernels::ops_for<float>(backend);

    std::vector<float> scores(t * t, 7.f);
    ops.attn_scores(q.data(), ld, k.data(), ld, scores.data(), t, dh, scale, false);
    auto want = ref_nt(qd, kd, t, dh, t);
    for (auto& w : want) w *= scale;
    check_close(scores, want, 1e-4, 1e-4);

    std::vector<float> out(t * ld, 0.f);
    ops.attn_mix(p.data(), q.data(), ld, out.data(), ld, t, dh, scale, false);
    auto mixed = ref_nn(p, qd, t, t, dh);
    for (int i = 0; i < t; ++i)
      for (int d = 0; d < dh; ++d)
        CHECK(std::abs(out[i * ld + d] - scale * mixed[i * dh + d]) <= 1e-4);

    std::vector<float> acc(t * ld, 0.f);
    ops.attn_mix_tn(p.data(), g.data(), ld, acc.data(), ld, t, dh, scale);
    auto tn = ref_tn(p, gd, t, t, dh);  // p is [t x t] so a^T indexing works directly
    for (int j = 0; j < t; ++j)
      for (int d = 0; d < dh; ++d)
        CHECK(std::abs(acc[j * ld + d] - scale * tn[j * dh + d]) <= 1e-4);
  }
}

TEST_CASE("softmax rows sum to one and are monotone in the logits") {
  Rng rng(5);
  const int rows = 64, cols = 16;
  auto x = random_vec(rng, rows * cols, 3.0);
  auto logits = x;
  kernels::ops<float>().softmax_rows(x.data(), rows, cols);
  for (int i = 0; i < rows; ++i) {
    float sum = 0.f;
    for (int j = 0; j < cols; ++j) {
      CHECK(x[i * cols + j] >= 0.f);
      sum += x[i * cols + j];
    }
    CHECK(sum == doctest::Approx(1.f).epsilon(1e-6));
    // ordering is preserved
    for (int j = 1; j < cols; ++j) {
      bool logit_le = logits[i * cols + j - 1] <= logits[i * cols + j];
      bool prob_le = x[i * cols + j - 1] <= x[i * cols + j];
      CHECK(logit_le == prob_le);
    }
  }
}

TEST_CASE("softmax is translation invariant and handles large logits") {
  std::vector<float> a = {1000.f, 1001.f, 999.f};
  std::vector<float> b = {0.f, 1.f, -1.f};
  kernels::ops<float>().softmax_rows(a.data(), 1, 3);
  kernels::ops<float>().softmax_rows(b.data(), 1, 3);
  for (int j = 0; j < 3; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-6));
}

TEST_CASE("layernorm forward normalises and backward matches finite differences") {
  Rng rng(17);
  const int rows = 4, cols = 12;
  auto x = random_vec_d(rng, rows * cols, 2.0);
  auto gamma = random_vec_d(rng, cols, 0.5);
  auto beta = random_vec_d(rng, cols, 0.5);
  for (auto& g : gamma) g += 1.0;
  const double eps = 1e-5;

  const auto& ops = kernels::ops<double>();
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  ops.layernorm_fwd(x.data(), gamma.data(), beta.data(), y.data(), mean.data(), rstd.data(), rows,
                    cols, eps);

  for (int i = 0; i < rows; ++i) {
    double m = 0, v = 0;
    for (int j = 0; j < cols; ++j) m += (y[i * cols + j] - beta[j]) / gamma[j];
    m /= cols;
    CHECK(std::abs(m) < 1e-10);
    for (int j = 0; j < cols; ++j) {
      double d = (y[i * cols + j] - beta[j]) / gamma[j];
      v += d * d;
    }
    CHECK(v / cols == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
  }

  // scalar loss L = sum(w .* y); check dx against central differences
  auto w = random_vec_d(rng, rows * cols);
  std::vector<double> dx(rows * cols, 0.0), dgamma(cols, 0.0), dbeta(cols, 0.0);
  ops.layernorm_bwd(w.data(), x.data(), gamma.data(), mean.data(), rstd.data(), dx.data(),
                    dgamma.data(), dbeta.data(), rows, cols);

  auto loss = [&](const std::vector<double>& xx) {
    std::vector<double> yy(rows * cols), mm(rows), rr(rows);
    ops.layernorm_fwd(xx.data(), gamma.data(), beta.data(), yy.data(), mm.data(), rr.data(), rows,
                      cols, eps);
    double l = 0;
    for (size_t i = 0; i < yy.size(); ++i) l += w[i] * yy[i];
    return l;
  };
  const double h = 1e-6;
  for (int idx : {0, 5, 13, 30, 47}) {
    auto xp = x, xm = x;
    xp[idx] += h;
    xm[idx] -= h;
    double fd = (loss(xp) - loss(xm)) / (2 * h);
    CHECK(dx[idx] == doctest::Approx(fd).epsilon(1e-5));
  }

  // parameter grads: dgamma_j = sum_i w_ij * xhat_ij, dbeta_j = sum_i w_ij
  for (int j = 0; j < cols; ++j) {
    double dg = 0, db = 0;
    for (int i = 0; i < rows; ++i) {
      double xh = (x[i * cols + j] - mean[i]) * rstd[i];
      dg += w[i * cols + j] * xh;
      db += w[i * cols + j];
    }
    CHECK(dgamma[j] == doctest::Approx(dg).epsilon(1e-10));
    CHECK(dbeta[j] == doctest::Approx(db).epsilon(1e-10));
  }
}

TEST_CASE("elementwise kernels agree across backends") {
  Rng rng(7);
  const int n = 1003;  // odd length exercises the vector tails
  auto x = random_vec(rng, n);
  auto y0 = random_vec(rng, n);
  for (auto backend : available_backends()) {
    CAPTURE(kernels::backend_name(backend));
    const auto& ops = kernels::ops_for<float>(backend);

    auto y = y0;
    ops.axpy(0.37f, x.data(), y.data(), n);
    for (int i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(y0[i] + 0.37f * x[i]).epsilon(1e-6));

    double want_dot = 0, want_ss = 0;
    for (int i = 0; i < n; ++i) {
      want_dot += static_cast<double>(x[i]) * y0[i];
      want_ss += static_cast<double>(x[i]) * x[i];
    }
    CHECK(ops.dot(x.data(), y0.data(), n) == doctest::Approx(want_dot).epsilon(1e-4));
    CHECK(ops.sum_sq(x.data(), n) == doctest::Approx(want_ss).epsilon(1e-4));

    std::vector<float> r(n), dr(n);
    ops.relu_fwd(x.data(), r.data(), n);
    ops.relu_bwd(x.data(), y0.data(), dr.data(), n);
    for (int i = 0; i < n; ++i) {
      CHECK(r[i] == (x[i] > 0 ? x[i] : 0.f));
      CHECK(dr[i] == (x[i] > 0 ? y0[i] : 0.f));
    }
  }
}

TEST_CASE("sigmoid forward/backward are consistent") {
  const auto& ops = kernels::ops<double>();
  std::vector<double> x = {-30, -2, -0.5, 0, 0.5, 2, 30};
  int n = static_cast<int>(x.size());
  std::vector<double> y(n), dy(n, 1.0), dx(n);
  ops.sigmoid_fwd(x.data(), y.data(), n);
  ops.sigmoid_bwd(y.data(), dy.data(), dx.data(), n);
  for (int i = 0; i < n; ++i) {
    CHECK(y[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x[i]))).epsilon(1e-12));
    CHECK(y[i] > 0.0);
    CHECK(y[i] < 1.0);
    const double h = 1e-6;
    double fd = (1.0 / (1.0 + std::exp(-(x[i] + h))) - 1.0 / (1.0 + std::exp(-(x[i] - h)))) / (2 * h);
    CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("adam step matches a hand-computed reference") {
  const auto& ops = kernels::ops<double>();
  std::vector<double> p = {1.0, -2.0, 0.5};
  std::vector<double> g = {0.1, -0.2, 0.0};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  // first step: m = 0.1*g, v = 0.001*g^2, mhat = g, vhat = g^2
  auto p0 = p;
  ops.adam_step(p.data(), g.data(), m.data(), v.data(), 3, lr, b1, b2, eps, 1.0 - b1, 1.0 - b2);
  for (int i = 0; i < 3; ++i) {
    double mhat = g[i];
    double vhat = g[i] * g[i];
    double want = p0[i] - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(p[i] == doctest::Approx(want).epsilon(1e-14));
    CHECK(m[i] == doctest::Approx(0.1 * g[i]).epsilon(1e-14));
    CHECK(v[i] == doctest::Approx(0.001 * g[i] * g[i]).epsilon(1e-14));
  }
  // zero gradient leaves the zero-state coordinate untouched
  CHECK(p[2] == p0[2]);
}

TEST_CASE("sgd step is p -= lr * g") {
  const auto& ops = kernels::ops<float>();
  std::vector<float> p = {1.f, 2.f}, g = {0.5f, -1.f};
  ops.sgd_step(p.data(), g.data(), 2, 0.1f);
  CHECK(p[0] == doctest::Approx(0.95f));
  CHECK(p[1] == doctest::Approx(2.1f));
}

TEST_CASE("bias kernels broadcast and reduce over rows") {
  const auto& ops = kernels::ops<float>();
  const int rows = 5, cols = 7;
  std::vector<float> x(rows * cols, 1.f), bias(cols);
  for (int j = 0; j < cols; ++j) bias[j] = static_cast<float>(j);
  ops.add_bias(x.data(), bias.data(), rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) CHECK(x[i * cols + j] == 1.f + j);

  std::vector<float> db(cols, 0.f);
  ops.bias_grad_acc(x.data(), db.data(), rows, cols);
  for (int j = 0; j < cols; ++j) CHECK(db[j] == doctest::Approx(rows * (1.f + j)));
}

TEST_CASE("backend selection respects cpu support and env override") {
  CHECK(kernels::backend_supported(Backend::scalar));
  auto prev = kernels::active_backend();

  kernels::select_backend(Backend::scalar);
  CHECK(kernels::active_backend() == Backend::scalar);
  kernels::select_backend(prev);

  setenv("STSC_KERNEL_BACKEND", "scalar", 1);
  CHECK(kernels::detect_backend() == Backend::scalar);
  setenv("STSC_KERNEL_BACKEND", "bogus", 1);
  CHECK_THROWS_AS(kernels::detect_backend(), config_error);
  unsetenv("STSC_KERNEL_BACKEND");

  // names round-trip for diagnostics
  CHECK(kernels::backend_name(Backend::avx2) == "avx2");
}
