#include <immintrin.h>

#include "kernels_detail.hpp"
#include "kernels_simd_impl.hpp"

namespace stsc::kernels::detail {
namespace {

struct v16f {
  using scalar = float;
  using reg = __m512;
  static constexpr int width = 16;
  static reg loadu(const float* p) { return _mm512_loadu_ps(p); }
  static void storeu(float* p, reg v) { _mm512_storeu_ps(p, v); }
  static reg broadcast(float x) { return _mm512_set1_ps(x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm512_fmadd_ps(a, b, c); }
  static reg zero() { return _mm512_setzero_ps(); }
  static float hsum(reg v) { return _mm512_reduce_add_ps(v); }
};

struct v8d {
  using scalar = double;
  using reg = __m512d;
  static constexpr int width = 8;
  static reg loadu(const double* p) { return _mm512_loadu_pd(p); }
  static void storeu(double* p, reg v) { _mm512_storeu_pd(p, v); }
  static reg broadcast(double x) { return _mm512_set1_pd(x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm512_fmadd_pd(a, b, c); }
  static reg zero() { return _mm512_setzero_pd(); }
  static double hsum(reg v) { return _mm512_reduce_add_pd(v); }
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
};

}  // namespace

// Only the gemm-shaped entries get an AVX-512 lane; everything else inherits
// the AVX2 or scalar implementation.
void fill_avx512(Ops<float>& t) {
  using E = entry<v16f>;
  t.gemm_nn = E::gemm_nn;
  t.gemm_nt = E::gemm_nt;
  t.gemm_tn_acc = E::gemm_tn_acc;
  t.attn_scores = E::attn_scores;
  t.attn_mix = E::attn_mix;
  t.attn_mix_tn = E::attn_mix_tn;
}

void fill_avx512(Ops<double>& t) {
  using E = entry<v8d>;
  t.gemm_nn = E::gemm_nn;
  t.gemm_nt = E::gemm_nt;
  t.gemm_tn_acc = E::gemm_tn_acc;
  t.attn_scores = E::attn_scores;
  t.attn_mix = E::attn_mix;
  t.attn_mix_tn = E::attn_mix_tn;
}

}  // namespace stsc::kernels::detail
