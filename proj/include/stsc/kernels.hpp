#pragma once

#include <string>

namespace stsc::kernels {

enum class Backend { scalar, avx2, avx512 };

// All matrices are dense row major.  The table below is the complete set of
// numeric primitives the model runs on; everything else in the codebase is
// glue.  Each backend fills the same table, and any entry a backend does not
// specialise falls back to the scalar implementation, so partial backends are
// fine.
template <typename T>
struct Ops {
  // C[m x n] = A[m x k] * B[k x n]   (accumulate ? += : =)
  void (*gemm_nn)(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
  // C[m x n] = A[m x k] * B[n x k]^T
  void (*gemm_nt)(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn_acc)(const T* a, const T* b, T* c, int m, int k, int n);

  void (*add_bias)(T* x, const T* bias, int rows, int cols);
  void (*bias_grad_acc)(const T* dy, T* db, int rows, int cols);

  void (*axpy)(T alpha, const T* x, T* y, int n);  // y += alpha * x
  void (*scale)(T alpha, T* x, int n);
  T (*dot)(const T* x, const T* y, int n);
  T (*sum_sq)(const T* x, int n);

  void (*relu_fwd)(const T* x, T* y, int n);
  void (*relu_bwd)(const T* x_pre, const T* dy, T* dx, int n);
  void (*sigmoid_fwd)(const T* x, T* y, int n);
  void (*sigmoid_bwd)(const T* y_post, const T* dy, T* dx, int n);

  // per-row normalisation over `cols`; mean/rstd have one entry per row
  void (*layernorm_fwd)(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd,
                        int rows, int cols, T eps);
  void (*layernorm_bwd)(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd,
                        T* dx, T* dgamma, T* dbeta, int rows, int cols);

  // numerically stable, in place
  void (*softmax_rows)(T* x, int rows, int cols);

  // attention micro-kernels over one window/head; q,k,v,g rows are strided by
  // ld* because heads are interleaved inside token rows
  //   scores[t x t] (+)= scale * Q K^T
  void (*attn_scores)(const T* q, int ldq, const T* k, int ldk, T* scores, int t, int dh,
                      T scale, bool accumulate);
  //   out[t x dh] (+)= scale * P[t x t] * V
  void (*attn_mix)(const T* p, const T* v, int ldv, T* out, int ldo, int t, int dh, T scale,
                   bool accumulate);
  //   out[t x dh] += scale * P[t x t]^T * G
  void (*attn_mix_tn)(const T* p, const T* g, int ldg, T* out, int ldo, int t, int dh, T scale);

  void (*adam_step)(T* p, const T* g, T* m, T* v, int n, T lr, T beta1, T beta2, T eps,
                    T bias_corr1, T bias_corr2);
  void (*sgd_step)(T* p, const T* g, int n, T lr);
};

// Table for the backend selected at startup (or via select_backend()).
template <typename T>
const Ops<T>& ops();

// Table for a specific backend; entries fall back to scalar where the backend
// has no specialisation.  Throws if the CPU cannot run the backend.
template <typename T>
const Ops<T>& ops_for(Backend b);

bool backend_supported(Backend b);
void select_backend(Backend b);

// Honours the STSC_KERNEL_BACKEND environment variable (scalar|avx2|avx512),
// otherwise picks the widest supported backend.
Backend detect_backend();
Backend active_backend();
std::string backend_name(Backend b);

}  // namespace stsc::kernels
