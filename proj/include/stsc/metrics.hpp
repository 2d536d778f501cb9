#pragma once

#include <cstddef>

namespace stsc {

template <typename T>
double mse(const T* a, const T* b, std::size_t n);

// peak signal-to-noise ratio in dB for a given peak value, capped at 100 dB
// so exact reconstructions stay finite
double psnr_db(double mean_squared_error, double max_val = 1.0);

// mean structural similarity over 8x8 uniform windows at stride 1, computed
// on the channel-mean grayscale of planar [channels][h][w] images
template <typename T>
double ssim(const T* a, const T* b, int h, int w, int channels, double max_val = 1.0);

}  // namespace stsc
