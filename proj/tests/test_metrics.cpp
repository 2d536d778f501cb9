#include <doctest.h>

#include <cmath>
#include <vector>

#include "stsc/common.hpp"
#include "stsc/metrics.hpp"
#include "stsc/rng.hpp"

using namespace stsc;

TEST_CASE("mse hand values") {
  std::vector<double> a = {0.0, 1.0}, b = {1.0, 1.0};
  CHECK(mse(a.data(), b.data(), 2) == doctest::Approx(0.5));
  CHECK(mse(a.data(), a.data(), 2) == 0.0);
  std::vector<float> fa = {2.0f}, fb = {-1.0f};
  CHECK(mse(fa.data(), fb.data(), 1) == doctest::Approx(9.0));
  CHECK_THROWS_AS(mse(a.data(), b.data(), 0), shape_error);
}

TEST_CASE("psnr follows the decibel formula and caps at 100") {
  CHECK(psnr_db(0.0) == 100.0);
  CHECK(psnr_db(1e-4) == doctest::Approx(40.0));
  CHECK(psnr_db(1e-2) == doctest::Approx(20.0));
  CHECK(psnr_db(1.0) == doctest::Approx(0.0));
  CHECK(psnr_db(1e-12) == 100.0);
  CHECK(psnr_db(1.0, 255.0) == doctest::Approx(10.0 * std::log10(255.0 * 255.0)));
  CHECK_THROWS_AS(psnr_db(-1.0), numeric_error);
  CHECK_THROWS_AS(psnr_db(std::nan("")), numeric_error);
  CHECK_THROWS_AS(psnr_db(1.0, 0.0), config_error);
}

namespace {

// direct per-window loops, no integral images
double ref_ssim(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                int ch, double max_val) {
  const double c1 = 0.0001 * max_val * max_val, c2 = 0.0009 * max_val * max_val;
  std::vector<double> ga(h * w, 0.0), gb(h * w, 0.0);
  for (int c = 0; c < ch; ++c)
    for (int i = 0; i < h * w; ++i) {
      ga[i] += a[c * h * w + i] / ch;
      gb[i] += b[c * h * w + i] / ch;
    }
  double total = 0;
  int count = 0;
  for (int r = 0; r + 8 <= h; ++r)
    for (int c = 0; c + 8 <= w; ++c, ++count) {
      double mx = 0, my = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          mx += ga[(r + i) * w + c + j];
          my += gb[(r + i) * w + c + j];
        }
      mx /= 64;
      my /= 64;
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          double dx = ga[(r + i) * w + c + j] - mx;
          double dy = gb[(r + i) * w + c + j] - my;
          vx += dx * dx;
          vy += dy * dy;
          cov += dx * dy;
        }
      vx /= 64;
      vy /= 64;
      cov /= 64;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / count;
}

}  // namespace

TEST_CASE("ssim of an image with itself is one") {
  Rng rng(5);
  int h = 16, w = 16, ch = 3;
  std::vector<double> img(ch * h * w);
  for (auto& v : img) v = rng.uniform01();
  CHECK(ssim(img.data(), img.data(), h, w, ch) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of constant planes follows the luminance term") {
  int h = 8, w = 8;
  std::vector<double> a(h * w, 0.5), b(h * w, 0.25);
  double expect = (2 * 0.5 * 0.25 + 1e-4) / (0.5 * 0.5 + 0.25 * 0.25 + 1e-4);
  CHECK(ssim(a.data(), b.data(), h, w, 1) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ssim matches a direct reference on random images") {
  Rng rng(9);
  const int cases[][3] = {{16, 16, 3}, {9, 13, 1}, {32, 32, 3}};
  for (const auto& cs : cases) {
    const int h = cs[0], w = cs[1], ch = cs[2];
    std::vector<double> a(ch * h * w), b(ch * h * w);
    for (auto& v : a) v = rng.uniform01();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.8 * a[i] + 0.2 * rng.uniform01();
    double got = ssim(a.data(), b.data(), h, w, ch);
    double want = ref_ssim(a, b, h, w, ch, 1.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got < 1.0);
    CHECK(got > 0.0);
    // symmetry
    CHECK(ssim(b.data(), a.data(), h, w, ch) == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("ssim float instantiation stays close to double") {
  Rng rng(3);
  int h = 16, w = 16, ch = 3;
  std::vector<double> a(ch * h * w), b(ch * h * w);
  for (auto& v : a) v = rng.uniform01();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = a[i] * 0.9;
  std::vector<float> fa(a.begin(), a.end()), fb(b.begin(), b.end());
  CHECK(ssim(fa.data(), fb.data(), h, w, ch) ==
        doctest::Approx(ssim(a.data(), b.data(), h, w, ch)).epsilon(1e-5));
}

TEST_CASE("ssim rejects images smaller than the window") {
  std::vector<double> a(3 * 4 * 4, 0.5);
  CHECK_THROWS_AS(ssim(a.data(), a.data(), 4, 4, 3), shape_error);
}
