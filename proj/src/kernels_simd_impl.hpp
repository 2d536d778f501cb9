#pragma once

// Templated gemm cores shared by the AVX2 and AVX-512 translation units.  The
// including TU supplies a vector-traits type V (register type, width, loads,
// fmadd, horizontal sum) defined in its own anonymous namespace, so each TU
// gets private instantiations compiled under its own target flags.
//
// gemm_core computes C[m x n] (+)= scale * A * B with generalised addressing:
// element A(i, p) lives at a[i * ai + p * ap], B row p at b + p * ldb, C row i
// at c + i * ldc.  That one routine covers gemm_nn, gemm_tn and the strided
// attention products.  gemm_nt_core covers the dot-product shaped cases.

#include <algorithm>

namespace stsc::kernels::simd {

template <class V, int R, int NV>
inline void mk_panel(const typename V::scalar* a, long ai, long ap, const typename V::scalar* b,
                     long ldb, typename V::scalar* c, long ldc, int kc, typename V::scalar scale) {
  constexpr int W = V::width;
  typename V::reg acc[R][NV];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = V::loadu(c + r * ldc + v * W);
  for (int p = 0; p < kc; ++p) {
    typename V::reg bv[NV];
    const typename V::scalar* brow = b + p * ldb;
    for (int v = 0; v < NV; ++v) bv[v] = V::loadu(brow + v * W);
    for (int r = 0; r < R; ++r) {
      typename V::reg av = V::broadcast(scale * a[r * ai + p * ap]);
      for (int v = 0; v < NV; ++v) acc[r][v] = V::fmadd(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < NV; ++v) V::storeu(c + r * ldc + v * W, acc[r][v]);
}

template <class V, int R>
inline void row_block(const typename V::scalar* a, long ai, long ap, const typename V::scalar* b,
                      long ldb, typename V::scalar* c, long ldc, int kc, int n,
                      typename V::scalar scale) {
  constexpr int W = V::width;
  int j = 0;
  for (; j + 2 * W <= n; j += 2 * W)
    mk_panel<V, R, 2>(a, ai, ap, b + j, ldb, c + j, ldc, kc, scale);
  for (; j + W <= n; j += W) mk_panel<V, R, 1>(a, ai, ap, b + j, ldb, c + j, ldc, kc, scale);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      typename V::scalar acc = c[r * ldc + j];
      for (int p = 0; p < kc; ++p) acc += scale * a[r * ai + p * ap] * b[p * ldb + j];
      c[r * ldc + j] = acc;
    }
  }
}

template <class V>
void gemm_core(const typename V::scalar* a, long ai, long ap, const typename V::scalar* b,
               long ldb, typename V::scalar* c, long ldc, int m, int k, int n,
               typename V::scalar scale, bool accumulate) {
  using S = typename V::scalar;
  if (!accumulate)
    for (int i = 0; i < m; ++i) std::fill_n(c + static_cast<long>(i) * ldc, n, S(0));
  constexpr int KC = 256;
  constexpr int RMAX = 6;
  for (int pb = 0; pb < k; pb += KC) {
    int kc = std::min(KC, k - pb);
    const S* ab = a + static_cast<long>(pb) * ap;
    const S* bb = b + static_cast<long>(pb) * ldb;
    int i = 0;
    for (; i + RMAX <= m; i += RMAX)
      row_block<V, RMAX>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n,
                         scale);
    switch (m - i) {
      case 5: row_block<V, 5>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n, scale); break;
      case 4: row_block<V, 4>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n, scale); break;
      case 3: row_block<V, 3>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n, scale); break;
      case 2: row_block<V, 2>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n, scale); break;
      case 1: row_block<V, 1>(ab + i * ai, ai, ap, bb, ldb, c + static_cast<long>(i) * ldc, ldc, kc, n, scale); break;
      default: break;
    }
  }
}

template <class V, int RA, int RB>
inline void mk_nt(const typename V::scalar* a, long lda, const typename V::scalar* b, long ldb,
                  typename V::scalar* c, long ldc, int k, typename V::scalar scale,
                  bool accumulate) {
  constexpr int W = V::width;
  using S = typename V::scalar;
  typename V::reg acc[RA][RB];
  for (int r = 0; r < RA; ++r)
    for (int s = 0; s < RB; ++s) acc[r][s] = V::zero();
  int p = 0;
  for (; p + W <= k; p += W) {
    typename V::reg av[RA], bv[RB];
    for (int r = 0; r < RA; ++r) av[r] = V::loadu(a + r * lda + p);
    for (int s = 0; s < RB; ++s) bv[s] = V::loadu(b + s * ldb + p);
    for (int r = 0; r < RA; ++r)
      for (int s = 0; s < RB; ++s) acc[r][s] = V::fmadd(av[r], bv[s], acc[r][s]);
  }
  for (int r = 0; r < RA; ++r)
    for (int s = 0; s < RB; ++s) {
      S sum = V::hsum(acc[r][s]);
      for (int pt = p; pt < k; ++pt) sum += a[r * lda + pt] * b[s * ldb + pt];
      sum *= scale;
      c[r * ldc + s] = accumulate ? c[r * ldc + s] + sum : sum;
    }
}

template <class V, int RA>
inline void nt_row_block(const typename V::scalar* a, long lda, const typename V::scalar* b,
                         long ldb, typename V::scalar* c, long ldc, int k, int n,
                         typename V::scalar scale, bool accumulate) {
  int j = 0;
  for (; j + 3 <= n; j += 3)
    mk_nt<V, RA, 3>(a, lda, b + static_cast<long>(j) * ldb, ldb, c + j, ldc, k, scale, accumulate);
  if (n - j == 2)
    mk_nt<V, RA, 2>(a, lda, b + static_cast<long>(j) * ldb, ldb, c + j, ldc, k, scale, accumulate);
  else if (n - j == 1)
    mk_nt<V, RA, 1>(a, lda, b + static_cast<long>(j) * ldb, ldb, c + j, ldc, k, scale, accumulate);
}

template <class V>
void gemm_nt_core(const typename V::scalar* a, long lda, const typename V::scalar* b, long ldb,
                  typename V::scalar* c, long ldc, int m, int k, int n, typename V::scalar scale,
                  bool accumulate) {
  int i = 0;
  for (; i + 4 <= m; i += 4)
    nt_row_block<V, 4>(a + static_cast<long>(i) * lda, lda, b, ldb, c + static_cast<long>(i) * ldc,
                       ldc, k, n, scale, accumulate);
  switch (m - i) {
    case 3: nt_row_block<V, 3>(a + static_cast<long>(i) * lda, lda, b, ldb, c + static_cast<long>(i) * ldc, ldc, k, n, scale, accumulate); break;
    case 2: nt_row_block<V, 2>(a + static_cast<long>(i) * lda, lda, b, ldb, c + static_cast<long>(i) * ldc, ldc, k, n, scale, accumulate); break;
    case 1: nt_row_block<V, 1>(a + static_cast<long>(i) * lda, lda, b, ldb, c + static_cast<long>(i) * ldc, ldc, k, n, scale, accumulate); break;
    default: break;
  }
}

}  // namespace stsc::kernels::simd
