#include "stsc/channel.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace stsc {

ChannelKind channel_kind_from(const std::string& name) {
  if (name == "awgn") return ChannelKind::awgn;
  if (name == "rayleigh") return ChannelKind::rayleigh;
  if (name == "rician") return ChannelKind::rician;
  throw config_error("unknown channel kind: " + name);
}

std::string to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::awgn: return "awgn";
    case ChannelKind::rayleigh: return "rayleigh";
    case ChannelKind::rician: return "rician";
  }
  throw config_error("invalid channel kind value");
}

CsiMode csi_mode_from(const std::string& name) {
  if (name == "perfect") return CsiMode::perfect;
  if (name == "none") return CsiMode::none;
  throw config_error("unknown csi mode: " + name);
}

std::string to_string(CsiMode mode) {
  return mode == CsiMode::perfect ? "perfect" : "none";
}

void ChannelSpec::validate() const {
  require(std::isfinite(snr_db), "snr_db must be finite");
  require(rician_k > 0.0, "rician_k must be positive");
}

double snr_to_noise_variance(double snr_db) {
  return std::pow(10.0, -snr_db / 10.0);
}

bool deep_fade(double h_re, double h_im) {
  return h_re * h_re + h_im * h_im < 1e-3 * 1e-3;
}

template <typename T>
ChannelDraw<T> draw_channel(const ChannelSpec& spec, int batch, int n_real, Rng& rng) {
  spec.validate();
  require<shape_error>(batch >= 1 && n_real >= 2 && n_real % 2 == 0,
                       "channel draw needs pairs of reals");
  ChannelDraw<T> draw;
  draw.batch = batch;
  draw.n_real = n_real;
  draw.sigma2 = snr_to_noise_variance(spec.snr_db);
  draw.h_re.resize(batch);
  draw.h_im.resize(batch);
  for (int b = 0; b < batch; ++b) {
    double re = 1.0, im = 0.0;
    switch (spec.kind) {
      case ChannelKind::awgn:
        break;
      case ChannelKind::rayleigh: {
        const double s = std::sqrt(0.5);
        re = s * rng.normal();
        im = s * rng.normal();
        // with receiver-side equalization a vanishing gain divides the signal
        // away entirely; such blocks are redrawn and the count reported
        while (spec.csi == CsiMode::perfect && deep_fade(re, im)) {
          re = s * rng.normal();
          im = s * rng.normal();
          ++draw.resamples;
        }
        break;
      }
      case ChannelKind::rician: {
        const double los = std::sqrt(spec.rician_k / (spec.rician_k + 1.0));
        const double s = std::sqrt(0.5 / (spec.rician_k + 1.0));
        re = los + s * rng.normal();
        im = s * rng.normal();
        while (spec.csi == CsiMode::perfect && deep_fade(re, im)) {
          re = los + s * rng.normal();
          im = s * rng.normal();
          ++draw.resamples;
        }
        break;
      }
    }
    draw.h_re[b] = re;
    draw.h_im[b] = im;
  }
  const double comp_sigma = std::sqrt(draw.sigma2 / 2.0);
  draw.noise.resize(static_cast<std::size_t>(batch) * n_real);
  for (auto& v : draw.noise) v = static_cast<T>(comp_sigma * rng.normal());
  return draw;
}

template <typename T>
void transmit(const T* x, int batch, int n_real, const ChannelDraw<T>& draw, T* y) {
  require<shape_error>(batch <= draw.batch && n_real == draw.n_real,
                       "draw does not cover this batch");
  for (int b = 0; b < batch; ++b) {
    const T a = static_cast<T>(draw.h_re[b]);
    const T c = static_cast<T>(draw.h_im[b]);
    const T* xb = x + static_cast<std::size_t>(b) * n_real;
    const T* nb = draw.noise.data() + static_cast<std::size_t>(b) * n_real;
    T* yb = y + static_cast<std::size_t>(b) * n_real;
    for (int j = 0; j < n_real; j += 2) {
      T re = xb[j], im = xb[j + 1];
      yb[j] = a * re - c * im + nb[j];
      yb[j + 1] = a * im + c * re + nb[j + 1];
    }
  }
}

template <typename T>
void equalize(const T* y, int batch, int n_real, const ChannelDraw<T>& draw, T* s) {
  require<shape_error>(batch <= draw.batch && n_real == draw.n_real,
                       "draw does not cover this batch");
  for (int b = 0; b < batch; ++b) {
    const double a = draw.h_re[b], c = draw.h_im[b];
    const double mag2 = a * a + c * c;
    require<numeric_error>(mag2 >= 1e-6 * 1e-6, "channel gain too small to equalize");
    const T ia = static_cast<T>(a / mag2);
    const T ic = static_cast<T>(c / mag2);
    const T* yb = y + static_cast<std::size_t>(b) * n_real;
    T* sb = s + static_cast<std::size_t>(b) * n_real;
    for (int j = 0; j < n_real; j += 2) {
      T re = yb[j], im = yb[j + 1];
      sb[j] = ia * re + ic * im;
      sb[j + 1] = ia * im - ic * re;
    }
  }
}

namespace {

std::atomic<int> g_power_warnings{0};

template <typename T>
void check_power(const T* x, int batch, int n_real, bool strict) {
  for (int b = 0; b < batch; ++b) {
    double s = 0.0;
    const T* xb = x + static_cast<std::size_t>(b) * n_real;
    for (int j = 0; j < n_real; ++j) s += static_cast<double>(xb[j]) * xb[j];
    double mean_power = 2.0 * s / n_real;  // per complex symbol
    if (std::abs(mean_power - 1.0) > 0.01) {
      std::string msg = "transmit power off contract: mean symbol power " +
                        std::to_string(mean_power);
      if (strict) throw numeric_error(msg);
      if (g_power_warnings.fetch_add(1) < 5) std::cerr << "warning: " << msg << "\n";
    }
  }
}

}  // namespace

template <typename T>
void apply_channel(const T* x, int batch, int n_real, const ChannelSpec& spec,
                   const ChannelDraw<T>& draw, T* out) {
  check_power(x, batch, n_real, spec.strict_power);
  transmit(x, batch, n_real, draw, out);
  if (spec.csi == CsiMode::perfect) equalize(out, batch, n_real, draw, out);
}

template <typename T>
void channel_backward(const T* d_out, int batch, int n_real, const ChannelSpec& spec,
                      const ChannelDraw<T>& draw, T* d_in) {
  if (spec.csi == CsiMode::perfect) {
    // s = x + n / h, so the jacobian in x is the identity
    std::copy_n(d_out, static_cast<std::size_t>(batch) * n_real, d_in);
    return;
  }
  for (int b = 0; b < batch; ++b) {
    const T a = static_cast<T>(draw.h_re[b]);
    const T c = static_cast<T>(draw.h_im[b]);
    const T* gb = d_out + static_cast<std::size_t>(b) * n_real;
    T* db = d_in + static_cast<std::size_t>(b) * n_real;
    for (int j = 0; j < n_real; j += 2) {
      T gre = gb[j], gim = gb[j + 1];
      db[j] = a * gre + c * gim;
      db[j + 1] = a * gim - c * gre;
    }
  }
}

#define STSC_INSTANTIATE(T)                                                               \
  template ChannelDraw<T> draw_channel<T>(const ChannelSpec&, int, int, Rng&);            \
  template void transmit<T>(const T*, int, int, const ChannelDraw<T>&, T*);               \
  template void equalize<T>(const T*, int, int, const ChannelDraw<T>&, T*);               \
  template void apply_channel<T>(const T*, int, int, const ChannelSpec&,                  \
                                 const ChannelDraw<T>&, T*);                              \
  template void channel_backward<T>(const T*, int, int, const ChannelSpec&,               \
                                    const ChannelDraw<T>&, T*);

STSC_INSTANTIATE(float)
STSC_INSTANTIATE(double)
#undef STSC_INSTANTIATE

}  // namespace stsc
