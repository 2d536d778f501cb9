#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stsc/common.hpp"
#include "stsc/image_io.hpp"
#include "stsc/rng.hpp"

using namespace stsc;
namespace fs = std::filesystem;

namespace {

struct Ppm {
  int w = 0, h = 0, maxval = 0;
  std::vector<std::uint8_t> data;
};

Ppm read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  Ppm p;
  in >> magic >> p.w >> p.h >> p.maxval;
  REQUIRE(magic == "P6");
  in.get();  // single whitespace after the header
  p.data.resize(static_cast<std::size_t>(p.w) * p.h * 3);
  in.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(p.data.size()));
  REQUIRE(in.gcount() == static_cast<std::streamsize>(p.data.size()));
  in.get();
  CHECK(in.eof());  // nothing after the pixel block
  return p;
}

std::string temp_file(const char* name) {
  auto dir = fs::temp_directory_path() / "stsc_image_io_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("grid layout, padding, and byte mapping") {
  const int h = 2, w = 3;
  // image 0: distinct ramp per channel; image 1: constants; image 2: out-of-range
  std::vector<double> imgs(3 * 3 * h * w, 0.0);
  for (int i = 0; i < 3 * h * w; ++i) imgs[i] = i / 18.0;
  for (int i = 0; i < h * w; ++i) {
    imgs[18 + i] = 0.25;
    imgs[18 + h * w + i] = 0.5;
    imgs[18 + 2 * h * w + i] = 1.0;
  }
  for (int i = 0; i < 3 * h * w; ++i) imgs[36 + i] = (i % 2 == 0) ? -0.4 : 1.7;

  auto path = temp_file("grid.ppm");
  write_image_grid_ppm(path, imgs.data(), 3, h, w, 2, 1);
  auto p = read_ppm(path);
  // 2 columns, 2 rows (last cell empty), one-pixel frame
  CHECK(p.w == 2 * w + 3);
  CHECK(p.h == 2 * h + 3);
  CHECK(p.maxval == 255);

  auto at = [&](int y, int x, int c) {
    return p.data[(static_cast<std::size_t>(y) * p.w + x) * 3 + c];
  };
  // frame pixels keep the background
  CHECK(at(0, 0, 0) == 40);
  CHECK(at(2, 4, 1) == 40);              // the column gap between cells
  CHECK(at(p.h - 1, p.w - 1, 2) == 40);  // empty fourth cell
  // image 0 starts at (1,1); value i/18 rounds to lround(255*i/18)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        int i = c * h * w + y * w + x;
        CHECK(at(1 + y, 1 + x, c) == std::lround(255.0 * i / 18.0));
      }
  // image 1 starts at (1, 1 + w + 1)
  CHECK(at(1, w + 2, 0) == std::lround(0.25 * 255));
  CHECK(at(1, w + 2, 1) == std::lround(0.5 * 255));
  CHECK(at(1, w + 2, 2) == 255);
  // image 2 clamps
  CHECK(at(h + 2, 1, 0) == 0);
  CHECK(at(h + 2, 1 + 1, 0) == 255);
}

TEST_CASE("single image with no padding is written verbatim") {
  Rng rng(3);
  std::vector<double> img(3 * 4 * 4);
  for (auto& v : img) v = rng.uniform01();
  auto path = temp_file("one.ppm");
  write_image_grid_ppm(path, img.data(), 1, 4, 4, 1, 0);
  auto p = read_ppm(path);
  CHECK(p.w == 4);
  CHECK(p.h == 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(p.data[(static_cast<std::size_t>(y) * 4 + x) * 3 + c] ==
              std::lround(255.0 * img[c * 16 + y * 4 + x]));
}

TEST_CASE("bad arguments and unwritable paths throw") {
  std::vector<double> img(3, 0.5);
  CHECK_THROWS_AS(write_image_grid_ppm(temp_file("x.ppm"), img.data(), 0, 1, 1, 1), config_error);
  CHECK_THROWS_AS(write_image_grid_ppm(temp_file("x.ppm"), img.data(), 1, 1, 1, 0), config_error);
  CHECK_THROWS_AS(write_image_grid_ppm("/nonexistent-dir/x.ppm", img.data(), 1, 1, 1, 1),
                  io_error);
}
