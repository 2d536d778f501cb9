#include "stsc/datagen.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "stsc/common.hpp"
#include "stsc/dataset.hpp"
#include "stsc/rng.hpp"

namespace stsc {

namespace {

struct Color {
  double r, g, b;
};

Color hsv(double h, double s, double v) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  double m = v - c;
  return {r + m, g + m, b + m};
}

Color lerp(const Color& a, const Color& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

void render_image(Rng& rng, int label, std::uint8_t* out) {
  const double base_hue = label / 10.0;
  Color base = hsv(base_hue + 0.02 * rng.normal(), 0.45 + 0.2 * rng.uniform01(),
                   0.55 + 0.3 * rng.uniform01());
  Color alt = hsv(base_hue + 0.35 + 0.02 * rng.normal(), 0.5 + 0.3 * rng.uniform01(),
                  0.25 + 0.3 * rng.uniform01());

  double theta = rng.uniform(0.0, 2.0 * 3.14159265358979);
  double gx = std::cos(theta), gy = std::sin(theta);

  struct Blob {
    double cx, cy, inv2r2, strength;
    Color color;
  };
  int n_blobs = 1 + static_cast<int>(rng.uniform_int(3));
  std::vector<Blob> blobs(n_blobs);
  for (auto& bl : blobs) {
    bl.cx = rng.uniform(4.0, 28.0);
    bl.cy = rng.uniform(4.0, 28.0);
    double r = rng.uniform(3.0, 9.0);
    bl.inv2r2 = 1.0 / (2.0 * r * r);
    bl.strength = rng.uniform(0.35, 0.9);
    bl.color = hsv(base_hue + rng.uniform(-0.12, 0.12), 0.5 + 0.4 * rng.uniform01(),
                   0.45 + 0.5 * rng.uniform01());
  }

  // class-dependent stripe overlay keeps labels visually separable
  double freq = 0.15 + 0.05 * (label % 4);
  double stripe_amp = 0.12 + 0.06 * rng.uniform01();
  double phase = rng.uniform(0.0, 6.28);

  for (int y = 0; y < kImageH; ++y)
    for (int x = 0; x < kImageW; ++x) {
      double t = (gx * x + gy * y) / 32.0 * 0.5 + 0.5;
      Color col = lerp(base, alt, std::clamp(t, 0.0, 1.0));
      for (const auto& bl : blobs) {
        double dx = x - bl.cx, dy = y - bl.cy;
        double w = bl.strength * std::exp(-(dx * dx + dy * dy) * bl.inv2r2);
        col = lerp(col, bl.color, w);
      }
      double stripe = stripe_amp * std::sin(freq * (x + 2.0 * y) + phase);
      col.r += stripe;
      col.g += stripe;
      col.b += stripe;
      auto put = [&](int plane, double v) {
        v = v * 255.0 + 5.0 * rng.normal();
        out[plane * kImageH * kImageW + y * kImageW + x] =
            static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      };
      put(0, col.r);
      put(1, col.g);
      put(2, col.b);
    }
}

std::uint32_t write_batch(const std::string& path, std::uint64_t seed, int first_index,
                          int count) {
  std::string buf;
  buf.reserve(static_cast<std::size_t>(count) * (1 + kImageBytes));
  std::vector<std::uint8_t> img(kImageBytes);
  for (int i = 0; i < count; ++i) {
    int global = first_index + i;
    int label = global % kNumClasses;
    Rng rng(derive_seed(seed, "img", static_cast<std::uint64_t>(global)));
    render_image(rng, label, img.data());
    buf.push_back(static_cast<char>(label));
    buf.append(reinterpret_cast<const char*>(img.data()), img.size());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require<io_error>(out.good(), "cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require<io_error>(out.good(), "short write to " + path);
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
}

}  // namespace

void generate_corpus(const std::string& root, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  constexpr int kPerFile = 10000;

  struct Job {
    std::string name, path;
    int first = 0;
    std::uint32_t crc = 0;
    std::exception_ptr err;
  };
  std::vector<Job> jobs(6);
  for (int f = 0; f < 6; ++f) {
    // the held-out file draws from a disjoint index range after the train files
    jobs[f].name = f < 5 ? "data_batch_" + std::to_string(f + 1) + ".bin" : "test_batch.bin";
    jobs[f].path = (fs::path(root) / jobs[f].name).string();
    jobs[f].first = f * kPerFile;
  }

  // files are independent (per-image seed streams), so render them in parallel
  std::vector<std::thread> pool;
  pool.reserve(jobs.size());
  for (auto& j : jobs)
    pool.emplace_back([&j, seed] {
      try {
        j.crc = write_batch(j.path, seed, j.first, kPerFile);
      } catch (...) {
        j.err = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& j : jobs)
    if (j.err) std::rethrow_exception(j.err);

  std::ofstream out(fs::path(root) / "checksums.txt", std::ios::trunc);
  require<io_error>(out.good(), "cannot write checksums.txt");
  for (const auto& j : jobs) {
    char line[64];
    std::snprintf(line, sizeof(line), "%08x  %s\n", j.crc, j.name.c_str());
    out << line;
  }
  require<io_error>(out.good(), "write failure on checksums.txt");
}

bool corpus_present(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::exists(fs::path(root) / "checksums.txt")) return false;
  try {
    load_dataset(root, false);
    load_dataset(root, true);
    return true;
  } catch (const io_error&) {
    return false;
  }
}

}  // namespace stsc
