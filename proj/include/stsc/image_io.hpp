#pragma once

#include <string>

namespace stsc {

// Writes n planar rgb images with values in [0,1] as one binary ppm grid,
// `cols` cells wide with a `pad`-pixel frame between and around cells.
// Values are clamped and rounded to 8 bits; the format is lossless beyond
// that quantization.
void write_image_grid_ppm(const std::string& path, const double* images, int n, int h, int w,
                          int cols, int pad = 2);

}  // namespace stsc
