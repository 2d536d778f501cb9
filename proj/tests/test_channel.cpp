#include <doctest.h>

#include <cmath>
#include <vector>

#include "stsc/channel.hpp"
#include "stsc/rng.hpp"

using namespace stsc;

TEST_CASE("snr maps to noise variance by the decibel rule") {
  CHECK(snr_to_noise_variance(0.0) == doctest::Approx(1.0));
  CHECK(snr_to_noise_variance(10.0) == doctest::Approx(0.1));
  CHECK(snr_to_noise_variance(20.0) == doctest::Approx(0.01));
  CHECK(snr_to_noise_variance(-10.0) == doctest::Approx(10.0));
  CHECK(snr_to_noise_variance(3.0) == doctest::Approx(0.5011872336));
}

TEST_CASE("name round trips and validation") {
  CHECK(channel_kind_from("awgn") == ChannelKind::awgn);
  CHECK(channel_kind_from("rayleigh") == ChannelKind::rayleigh);
  CHECK(channel_kind_from("rician") == ChannelKind::rician);
  CHECK_THROWS_AS(channel_kind_from("fancy"), config_error);
  CHECK(to_string(ChannelKind::rician) == "rician");
  CHECK(csi_mode_from("perfect") == CsiMode::perfect);
  CHECK(csi_mode_from("none") == CsiMode::none);
  CHECK_THROWS_AS(csi_mode_from("partial"), config_error);
  ChannelSpec bad;
  bad.rician_k = 0.0;
  CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("awgn draw is the unit gain") {
  ChannelSpec spec;
  spec.kind = ChannelKind::awgn;
  spec.snr_db = 10.0;
  Rng rng(1);
  auto draw = draw_channel<double>(spec, 8, 64, rng);
  for (int b = 0; b < 8; ++b) {
    CHECK(draw.h_re[b] == 1.0);
    CHECK(draw.h_im[b] == 0.0);
  }
  CHECK(draw.resamples == 0);
  CHECK(draw.sigma2 == doctest::Approx(0.1));
}

TEST_CASE("fading gains have the right first and second moments") {
  Rng rng(42);
  int n = 20000;

  SUBCASE("rayleigh") {
    ChannelSpec spec;
    spec.kind = ChannelKind::rayleigh;
    auto draw = draw_channel<double>(spec, n, 2, rng);
    double m_re = 0, m_im = 0, p = 0;
    for (int b = 0; b < n; ++b) {
      m_re += draw.h_re[b];
      m_im += draw.h_im[b];
      p += draw.h_re[b] * draw.h_re[b] + draw.h_im[b] * draw.h_im[b];
    }
    CHECK(m_re / n == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
    CHECK(m_im / n == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
    CHECK(p / n == doctest::Approx(1.0).epsilon(0.02));
  }

  SUBCASE("rician concentrates around the line-of-sight path") {
    ChannelSpec spec;
    spec.kind = ChannelKind::rician;
    spec.rician_k = 10.0;
    auto draw = draw_channel<double>(spec, n, 2, rng);
    double m_re = 0, m_im = 0, p = 0, v_re = 0;
    for (int b = 0; b < n; ++b) {
      m_re += draw.h_re[b];
      m_im += draw.h_im[b];
      p += draw.h_re[b] * draw.h_re[b] + draw.h_im[b] * draw.h_im[b];
    }
    m_re /= n;
    m_im /= n;
    for (int b = 0; b < n; ++b) v_re += (draw.h_re[b] - m_re) * (draw.h_re[b] - m_re);
    CHECK(m_re == doctest::Approx(std::sqrt(10.0 / 11.0)).epsilon(0.005));
    CHECK(m_im == doctest::Approx(0.0).scale(1.0).epsilon(0.01));
    CHECK(p / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(v_re / n == doctest::Approx(0.5 / 11.0).epsilon(0.05));
  }
}

TEST_CASE("noise field is scaled to half the symbol variance per component") {
  ChannelSpec spec;
  spec.snr_db = 6.0;
  Rng rng(7);
  auto draw = draw_channel<double>(spec, 100, 1024, rng);
  double s2 = 0;
  for (double v : draw.noise) s2 += v * v;
  s2 /= draw.noise.size();
  CHECK(s2 == doctest::Approx(snr_to_noise_variance(6.0) / 2.0).epsilon(0.02));
}

TEST_CASE("empirical snr calibrates within a tenth of a decibel") {
  for (double snr : {0.0, 10.0}) {
    ChannelSpec spec;
    spec.kind = ChannelKind::awgn;
    spec.csi = CsiMode::none;
    spec.snr_db = snr;
    Rng rng(19);
    int batch = 100, n_real = 1024;
    auto draw = draw_channel<double>(spec, batch, n_real, rng);
    std::vector<double> x(static_cast<std::size_t>(batch) * n_real);
    const double r = std::sqrt(0.5);
    for (std::size_t j = 0; j < x.size(); j += 2) {
      x[j] = r;
      x[j + 1] = -r;
    }
    std::vector<double> y(x.size());
    apply_channel(x.data(), batch, n_real, spec, draw, y.data());
    double noise_power = 0;
    for (std::size_t j = 0; j < x.size(); j += 2) {
      double dre = y[j] - x[j], dim = y[j + 1] - x[j + 1];
      noise_power += dre * dre + dim * dim;
    }
    noise_power /= (x.size() / 2);
    double snr_est = 10.0 * std::log10(1.0 / noise_power);
    CHECK(snr_est == doctest::Approx(snr).scale(1.0).epsilon(0.1));
  }
}

TEST_CASE("fading preserves average received power before equalization") {
  ChannelSpec spec;
  spec.kind = ChannelKind::rayleigh;
  spec.snr_db = 300.0;  // effectively noiseless
  Rng rng(23);
  int batch = 20000, n_real = 8;
  auto draw = draw_channel<double>(spec, batch, n_real, rng);
  std::vector<double> x(static_cast<std::size_t>(batch) * n_real);
  const double r = std::sqrt(0.5);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (j % 2 == 0) ? r : -r;
  std::vector<double> y(x.size());
  transmit(x.data(), batch, n_real, draw, y.data());
  double p = 0;
  for (double v : y) p += v * v;
  p /= (x.size() / 2);
  CHECK(p == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("noiseless transmit then equalize is the identity") {
  ChannelDraw<double> draw;
  draw.batch = 2;
  draw.n_real = 6;
  draw.h_re = {0.3, -1.2};
  draw.h_im = {-0.4, 0.9};
  draw.noise.assign(12, 0.0);
  std::vector<double> x = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6,
                           1.0, -1.0, 0.25, 0.75, -0.3, 0.05};
  std::vector<double> y(x.size()), s(x.size());
  transmit(x.data(), 2, 6, draw, y.data());
  CHECK(y[0] == doctest::Approx(0.3 * 0.1 - (-0.4) * (-0.2)));
  CHECK(y[1] == doctest::Approx(0.3 * (-0.2) + (-0.4) * 0.1));
  equalize(y.data(), 2, 6, draw, s.data());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(s[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("equalizing a vanishing gain is an error") {
  ChannelDraw<double> draw;
  draw.batch = 1;
  draw.n_real = 2;
  draw.h_re = {1e-7};
  draw.h_im = {0.0};
  draw.noise.assign(2, 0.0);
  std::vector<double> y = {0.5, 0.5}, s(2);
  CHECK_THROWS_AS(equalize(y.data(), 1, 2, draw, s.data()), numeric_error);
}

TEST_CASE("deep fade predicate matches the resample threshold") {
  CHECK(deep_fade(1e-4, 0.0));
  CHECK(deep_fade(0.0005, 0.0005));
  CHECK_FALSE(deep_fade(1.0, 0.0));
  CHECK_FALSE(deep_fade(0.0008, 0.0008));
}

TEST_CASE("draws are deterministic under the same stream") {
  ChannelSpec spec;
  spec.kind = ChannelKind::rician;
  Rng a(5), b(5), c(6);
  auto da = draw_channel<double>(spec, 4, 16, a);
  auto db = draw_channel<double>(spec, 4, 16, b);
  auto dc = draw_channel<double>(spec, 4, 16, c);
  CHECK(da.h_re == db.h_re);
  CHECK(da.h_im == db.h_im);
  CHECK(da.noise == db.noise);
  CHECK(da.h_re != dc.h_re);
}

TEST_CASE("strict power contract rejects off-power symbols") {
  ChannelSpec spec;
  spec.strict_power = true;
  Rng rng(3);
  auto draw = draw_channel<double>(spec, 1, 8, rng);
  std::vector<double> x(8, 1.0), y(8);  // mean symbol power 2, off contract
  CHECK_THROWS_AS(apply_channel(x.data(), 1, 8, spec, draw, y.data()), numeric_error);
  spec.strict_power = false;
  CHECK_NOTHROW(apply_channel(x.data(), 1, 8, spec, draw, y.data()));
  const double r = std::sqrt(0.5);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = r;
  spec.strict_power = true;
  CHECK_NOTHROW(apply_channel(x.data(), 1, 8, spec, draw, y.data()));
}

TEST_CASE("channel adjoint matches finite differences for a frozen draw") {
  int batch = 2, n_real = 8;
  Rng rng(11);
  std::vector<double> weights(static_cast<std::size_t>(batch) * n_real);
  for (auto& v : weights) v = rng.normal();

  for (auto csi : {CsiMode::perfect, CsiMode::none}) {
    ChannelSpec spec;
    spec.kind = ChannelKind::rayleigh;
    spec.snr_db = 10.0;
    spec.csi = csi;
    auto draw = draw_channel<double>(spec, batch, n_real, rng);
    std::vector<double> x(static_cast<std::size_t>(batch) * n_real);
    for (auto& v : x) v = rng.normal();
    // normalize each image to the unit power contract
    for (int b = 0; b < batch; ++b) {
      double s = 0;
      for (int j = 0; j < n_real; ++j) s += x[b * n_real + j] * x[b * n_real + j];
      double a = std::sqrt(n_real / (2.0 * s));
      for (int j = 0; j < n_real; ++j) x[b * n_real + j] *= a;
    }
    auto loss = [&]() {
      std::vector<double> y(x.size());
      apply_channel(x.data(), batch, n_real, spec, draw, y.data());
      double l = 0;
      for (std::size_t i = 0; i < y.size(); ++i) l += weights[i] * y[i];
      return l;
    };
    std::vector<double> d_in(x.size());
    channel_backward(weights.data(), batch, n_real, spec, draw, d_in.data());
    const double eps = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double save = x[i];
      x[i] = save + eps;
      double lp = loss();
      x[i] = save - eps;
      double lm = loss();
      x[i] = save;
      double fd = (lp - lm) / (2 * eps);
      CHECK(d_in[i] == doctest::Approx(fd).epsilon(1e-7).scale(1.0));
    }
  }
}
