#include "stsc/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "stsc/common.hpp"

namespace stsc {

namespace {
constexpr std::uint8_t kBackground = 40;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}
}  // namespace

void write_image_grid_ppm(const std::string& path, const double* images, int n, int h, int w,
                          int cols, int pad) {
  require(n >= 1 && h >= 1 && w >= 1, "image grid needs at least one non-empty image");
  require(cols >= 1 && pad >= 0, "bad grid geometry");
  const int rows = (n + cols - 1) / cols;
  const int gw = cols * w + (cols + 1) * pad;
  const int gh = rows * h + (rows + 1) * pad;

  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(gw) * gh * 3, kBackground);
  const std::size_t px = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const double* img = images + i * 3 * px;
    const int x0 = pad + (i % cols) * (w + pad);
    const int y0 = pad + (i / cols) * (h + pad);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::uint8_t* dst = canvas.data() + (static_cast<std::size_t>(y0 + y) * gw + x0 + x) * 3;
        for (int c = 0; c < 3; ++c) dst[c] = to_byte(img[c * px + y * w + x]);
      }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require<io_error>(out.good(), "cannot open '" + path + "' for writing");
  out << "P6\n" << gw << " " << gh << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  out.flush();
  require<io_error>(out.good(), "failed writing '" + path + "'");
}

}  // namespace stsc
