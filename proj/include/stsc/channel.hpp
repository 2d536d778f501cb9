#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsc/common.hpp"
#include "stsc/rng.hpp"

namespace stsc {

enum class ChannelKind { awgn, rayleigh, rician };
enum class CsiMode { perfect, none };

ChannelKind channel_kind_from(const std::string& name);
std::string to_string(ChannelKind kind);
CsiMode csi_mode_from(const std::string& name);
std::string to_string(CsiMode mode);

struct ChannelSpec {
  ChannelKind kind = ChannelKind::awgn;
  double snr_db = 12.0;
  double rician_k = 10.0;  // linear power ratio of the line-of-sight component
  CsiMode csi = CsiMode::perfect;
  bool strict_power = false;

  void validate() const;
};

// noise variance per complex symbol for unit average signal power
double snr_to_noise_variance(double snr_db);

// one block-fading realization: a single complex gain per image plus a fully
// materialized noise field so replays are bit-for-bit reproducible
template <typename T>
struct ChannelDraw {
  int batch = 0;
  int n_real = 0;
  std::vector<double> h_re, h_im;  // per image
  std::vector<T> noise;            // [batch * n_real], already scaled
  double sigma2 = 0.0;
  int resamples = 0;
};

bool deep_fade(double h_re, double h_im);

template <typename T>
ChannelDraw<T> draw_channel(const ChannelSpec& spec, int batch, int n_real, Rng& rng);

// y = h x + n on interleaved (re, im) pairs
template <typename T>
void transmit(const T* x, int batch, int n_real, const ChannelDraw<T>& draw, T* y);

// s = y / h; throws when the gain is numerically too small to divide by
template <typename T>
void equalize(const T* y, int batch, int n_real, const ChannelDraw<T>& draw, T* s);

// transmit, then equalize when csi is available; checks the unit-power
// contract on the input when asked to
template <typename T>
void apply_channel(const T* x, int batch, int n_real, const ChannelSpec& spec,
                   const ChannelDraw<T>& draw, T* out);

// adjoint of apply_channel for a frozen draw
template <typename T>
void channel_backward(const T* d_out, int batch, int n_real, const ChannelSpec& spec,
                      const ChannelDraw<T>& draw, T* d_in);

}  // namespace stsc
