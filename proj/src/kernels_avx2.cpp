#include <immintrin.h>

#include <cmath>

#include "kernels_detail.hpp"
#include "kernels_simd_impl.hpp"

namespace stsc::kernels::detail {
namespace {

struct v8f {
  using scalar = float;
  using reg = __m256;
  static constexpr int width = 8;
  static reg loadu(const float* p) { return _mm256_loadu_ps(p); }
  static void storeu(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg broadcast(float x) { return _mm256_set1_ps(x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg zero() { return _mm256_setzero_ps(); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
};

struct v4d {
  using scalar = double;
  using reg = __m256d;
  static constexpr int width = 4;
  static reg loadu(const double* p) { return _mm256_loadu_pd(p); }
  static void storeu(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg broadcast(double x) { return _mm256_set1_pd(x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg zero() { return _mm256_setzero_pd(); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  }
};

template <class V>
struct entry {
  using T = typename V::scalar;

  static void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    simd::gemm_core<V>(a, k, 1, b, n, c, n, m, k, n, T(1), accumulate);
  }
  static void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    simd::gemm_nt_core<V>(a, k, b, k, c, n, m, k, n, T(1), accumulate);
  }
  static void gemm_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    simd::gemm_core<V>(a, 1, m, b, n, c, n, m, k, n, T(1), true);
  }
  static void attn_scores(const T* q, int ldq, const T* k, int ldk, T* scores, int t, int dh,
                          T scale, bool accumulate) {
    simd::gemm_nt_core<V>(q, ldq, k, ldk, scores, t, t, dh, t, scale, accumulate);
  }
  static void attn_mix(const T* p, const T* v, int ldv, T* out, int ldo, int t, int dh, T scale,
                       bool accumulate) {
    simd::gemm_core<V>(p, t, 1, v, ldv, out, ldo, t, t, dh, scale, accumulate);
  }
  static void attn_mix_tn(const T* p, const T* g, int ldg, T* out, int ldo, int t, int dh,
                          T scale) {
    simd::gemm_core<V>(p, 1, t, g, ldg, out, ldo, t, t, dh, scale, true);
  }

  static void axpy(T alpha, const T* x, T* y, int n) {
    auto av = V::broadcast(alpha);
    int i = 0;
    for (; i + V::width <= n; i += V::width)
      V::storeu(y + i, V::fmadd(av, V::loadu(x + i), V::loadu(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
  }

  static T dot(const T* x, const T* y, int n) {
    auto acc = V::zero();
    int i = 0;
    for (; i + V::width <= n; i += V::width)
      acc = V::fmadd(V::loadu(x + i), V::loadu(y + i), acc);
    T sum = V::hsum(acc);
    for (; i < n; ++i) sum += x[i] * y[i];
    return sum;
  }

  static T sum_sq(const T* x, int n) {
    auto acc = V::zero();
    int i = 0;
    for (; i + V::width <= n; i += V::width) {
      auto v = V::loadu(x + i);
      acc = V::fmadd(v, v, acc);
    }
    T sum = V::hsum(acc);
    for (; i < n; ++i) sum += x[i] * x[i];
    return sum;
  }
};

void relu_fwd_f32(const float* x, float* y, int n) {
  __m256 z = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_bwd_f32(const float* x_pre, const float* dy, float* dx, int n) {
  __m256 z = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x_pre + i), z, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x_pre[i] > 0.f ? dy[i] : 0.f;
}

}  // namespace

void fill_avx2(Ops<float>& t) {
  using E = entry<v8f>;
  t.gemm_nn = E::gemm_nn;
  t.gemm_nt = E::gemm_nt;
  t.gemm_tn_acc = E::gemm_tn_acc;
  t.attn_scores = E::attn_scores;
  t.attn_mix = E::attn_mix;
  t.attn_mix_tn = E::attn_mix_tn;
  t.axpy = E::axpy;
  t.dot = E::dot;
  t.sum_sq = E::sum_sq;
  t.relu_fwd = relu_fwd_f32;
  t.relu_bwd = relu_bwd_f32;
}

void fill_avx2(Ops<double>& t) {
  using E = entry<v4d>;
  t.gemm_nn = E::gemm_nn;
  t.gemm_nt = E::gemm_nt;
  t.gemm_tn_acc = E::gemm_tn_acc;
  t.attn_scores = E::attn_scores;
  t.attn_mix = E::attn_mix;
  t.attn_mix_tn = E::attn_mix_tn;
  t.axpy = E::axpy;
  t.dot = E::dot;
  t.sum_sq = E::sum_sq;
}

}  // namespace stsc::kernels::detail
