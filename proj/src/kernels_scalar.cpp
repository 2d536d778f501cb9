#include <cmath>

#include "kernels_detail.hpp"

namespace stsc::kernels::detail {
namespace {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<long>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      const T* brow = b + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<long>(i) * k;
    T* crow = c + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<long>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<long>(p) * m;
    const T* brow = b + static_cast<long>(p) * n;
    for (int i = 0; i < m; ++i) {
      T av = arow[i];
      T* crow = c + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void add_bias(T* x, const T* bias, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T* row = x + static_cast<long>(i) * cols;
    for (int j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

template <typename T>
void bias_grad_acc(const T* dy, T* db, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const T* row = dy + static_cast<long>(i) * cols;
    for (int j = 0; j < cols; ++j) db[j] += row[j];
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T alpha, T* x, int n) {
  for (int i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
T dot(const T* x, const T* y, int n) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
T sum_sq(const T* x, int n) {
  T acc = T(0);
  for (int i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

template <typename T>
void relu_fwd(const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd(const T* x_pre, const T* dy, T* dx, int n) {
  for (int i = 0; i < n; ++i) dx[i] = x_pre[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void sigmoid_fwd(const T* x, T* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void sigmoid_bwd(const T* y_post, const T* dy, T* dx, int n) {
  for (int i = 0; i < n; ++i) dx[i] = dy[i] * y_post[i] * (T(1) - y_post[i]);
}

template <typename T>
void layernorm_fwd(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int rows,
                   int cols, T eps) {
  for (int i = 0; i < rows; ++i) {
    const T* xr = x + static_cast<long>(i) * cols;
    T* yr = y + static_cast<long>(i) * cols;
    T mu = T(0);
    for (int j = 0; j < cols; ++j) mu += xr[j];
    mu /= T(cols);
    T var = T(0);
    for (int j = 0; j < cols; ++j) {
      T d = xr[j] - mu;
      var += d * d;
    }
    var /= T(cols);
    T rs = T(1) / std::sqrt(var + eps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < cols; ++j) yr[j] = gamma[j] * ((xr[j] - mu) * rs) + beta[j];
  }
}

template <typename T>
void layernorm_bwd(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx,
                   T* dgamma, T* dbeta, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const T* dyr = dy + static_cast<long>(i) * cols;
    const T* xr = x + static_cast<long>(i) * cols;
    T* dxr = dx + static_cast<long>(i) * cols;
    T mu = mean[i], rs = rstd[i];
    T sum_dxh = T(0), sum_dxh_xh = T(0);
    for (int j = 0; j < cols; ++j) {
      T xh = (xr[j] - mu) * rs;
      T dxh = dyr[j] * gamma[j];
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh;
      dgamma[j] += dyr[j] * xh;
      dbeta[j] += dyr[j];
    }
    T inv = T(1) / T(cols);
    for (int j = 0; j < cols; ++j) {
      T xh = (xr[j] - mu) * rs;
      T dxh = dyr[j] * gamma[j];
      dxr[j] = rs * (dxh - inv * sum_dxh - xh * inv * sum_dxh_xh);
    }
  }
}

template <typename T>
void softmax_rows(T* x, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T* row = x + static_cast<long>(i) * cols;
    T mx = row[0];
    for (int j = 1; j < cols; ++j) mx = row[j] > mx ? row[j] : mx;
    T sum = T(0);
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    T inv = T(1) / sum;
    for (int j = 0; j < cols; ++j) row[j] *= inv;
  }
}

template <typename T>
void attn_scores(const T* q, int ldq, const T* k, int ldk, T* scores, int t, int dh, T scale,
                 bool accumulate) {
  for (int i = 0; i < t; ++i) {
    const T* qi = q + static_cast<long>(i) * ldq;
    T* srow = scores + static_cast<long>(i) * t;
    for (int j = 0; j < t; ++j) {
      const T* kj = k + static_cast<long>(j) * ldk;
      T acc = T(0);
      for (int d = 0; d < dh; ++d) acc += qi[d] * kj[d];
      acc *= scale;
      srow[j] = accumulate ? srow[j] + acc : acc;
    }
  }
}

template <typename T>
void attn_mix(const T* p, const T* v, int ldv, T* out, int ldo, int t, int dh, T scale,
              bool accumulate) {
  for (int i = 0; i < t; ++i) {
    const T* prow = p + static_cast<long>(i) * t;
    T* orow = out + static_cast<long>(i) * ldo;
    if (!accumulate)
      for (int d = 0; d < dh; ++d) orow[d] = T(0);
    for (int j = 0; j < t; ++j) {
      T pv = scale * prow[j];
      const T* vrow = v + static_cast<long>(j) * ldv;
      for (int d = 0; d < dh; ++d) orow[d] += pv * vrow[d];
    }
  }
}

template <typename T>
void attn_mix_tn(const T* p, const T* g, int ldg, T* out, int ldo, int t, int dh, T scale) {
  for (int i = 0; i < t; ++i) {
    const T* prow = p + static_cast<long>(i) * t;
    const T* grow = g + static_cast<long>(i) * ldg;
    for (int j = 0; j < t; ++j) {
      T pv = scale * prow[j];
      T* orow = out + static_cast<long>(j) * ldo;
      for (int d = 0; d < dh; ++d) orow[d] += pv * grow[d];
    }
  }
}

template <typename T>
void adam_step(T* p, const T* g, T* m, T* v, int n, T lr, T beta1, T beta2, T eps, T bias_corr1,
               T bias_corr2) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    T mhat = m[i] / bias_corr1;
    T vhat = v[i] / bias_corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
void sgd_step(T* p, const T* g, int n, T lr) {
  for (int i = 0; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace

template <typename T>
void fill_scalar(Ops<T>& t) {
  t.gemm_nn = gemm_nn<T>;
  t.gemm_nt = gemm_nt<T>;
  t.gemm_tn_acc = gemm_tn_acc<T>;
  t.add_bias = add_bias<T>;
  t.bias_grad_acc = bias_grad_acc<T>;
  t.axpy = axpy<T>;
  t.scale = scale<T>;
  t.dot = dot<T>;
  t.sum_sq = sum_sq<T>;
  t.relu_fwd = relu_fwd<T>;
  t.relu_bwd = relu_bwd<T>;
  t.sigmoid_fwd = sigmoid_fwd<T>;
  t.sigmoid_bwd = sigmoid_bwd<T>;
  t.layernorm_fwd = layernorm_fwd<T>;
  t.layernorm_bwd = layernorm_bwd<T>;
  t.softmax_rows = softmax_rows<T>;
  t.attn_scores = attn_scores<T>;
  t.attn_mix = attn_mix<T>;
  t.attn_mix_tn = attn_mix_tn<T>;
  t.adam_step = adam_step<T>;
  t.sgd_step = sgd_step<T>;
}

template void fill_scalar<float>(Ops<float>&);
template void fill_scalar<double>(Ops<double>&);

}  // namespace stsc::kernels::detail
