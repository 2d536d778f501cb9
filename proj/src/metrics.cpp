#include "stsc/metrics.hpp"

#include <cmath>
#include <vector>

#include "stsc/common.hpp"

namespace stsc {

template <typename T>
double mse(const T* a, const T* b, std::size_t n) {
  require<shape_error>(n > 0, "mse over an empty range");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(n);
}

double psnr_db(double mean_squared_error, double max_val) {
  require(max_val > 0.0, "psnr needs a positive peak value");
  require<numeric_error>(mean_squared_error >= 0.0 && std::isfinite(mean_squared_error),
                         "psnr needs a finite non-negative mse");
  if (mean_squared_error <= 0.0) return 100.0;
  double v = 10.0 * std::log10(max_val * max_val / mean_squared_error);
  return v > 100.0 ? 100.0 : v;
}

namespace {

// inclusive prefix sums with a zero border row/column
void integral(const std::vector<double>& img, int h, int w, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  for (int r = 0; r < h; ++r) {
    double run = 0.0;
    for (int c = 0; c < w; ++c) {
      run += img[static_cast<std::size_t>(r) * w + c];
      out[static_cast<std::size_t>(r + 1) * (w + 1) + c + 1] =
          out[static_cast<std::size_t>(r) * (w + 1) + c + 1] + run;
    }
  }
}

double window_sum(const std::vector<double>& ii, int w, int r0, int c0, int win) {
  const int stride = w + 1;
  return ii[static_cast<std::size_t>(r0 + win) * stride + c0 + win] -
         ii[static_cast<std::size_t>(r0) * stride + c0 + win] -
         ii[static_cast<std::size_t>(r0 + win) * stride + c0] +
         ii[static_cast<std::size_t>(r0) * stride + c0];
}

}  // namespace

template <typename T>
double ssim(const T* a, const T* b, int h, int w, int channels, double max_val) {
  constexpr int win = 8;
  require<shape_error>(h >= win && w >= win && channels >= 1, "image too small for ssim");
  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> ga(plane, 0.0), gb(plane, 0.0);
  for (int ch = 0; ch < channels; ++ch)
    for (std::size_t i = 0; i < plane; ++i) {
      ga[i] += static_cast<double>(a[ch * plane + i]);
      gb[i] += static_cast<double>(b[ch * plane + i]);
    }
  for (std::size_t i = 0; i < plane; ++i) {
    ga[i] /= channels;
    gb[i] /= channels;
  }

  std::vector<double> aa(plane), bb(plane), ab(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    aa[i] = ga[i] * ga[i];
    bb[i] = gb[i] * gb[i];
    ab[i] = ga[i] * gb[i];
  }
  std::vector<double> ia, ib, iaa, ibb, iab;
  integral(ga, h, w, ia);
  integral(gb, h, w, ib);
  integral(aa, h, w, iaa);
  integral(bb, h, w, ibb);
  integral(ab, h, w, iab);

  const double inv_n = 1.0 / (win * win);
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + win <= h; ++r)
    for (int c = 0; c + win <= w; ++c, ++count) {
      double mx = window_sum(ia, w, r, c, win) * inv_n;
      double my = window_sum(ib, w, r, c, win) * inv_n;
      double vx = window_sum(iaa, w, r, c, win) * inv_n - mx * mx;
      double vy = window_sum(ibb, w, r, c, win) * inv_n - my * my;
      double cov = window_sum(iab, w, r, c, win) * inv_n - mx * my;
      double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
    }
  return total / count;
}

template double mse<float>(const float*, const float*, std::size_t);
template double mse<double>(const double*, const double*, std::size_t);
template double ssim<float>(const float*, const float*, int, int, int, double);
template double ssim<double>(const double*, const double*, int, int, int, double);

}  // namespace stsc
