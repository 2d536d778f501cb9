#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsc/common.hpp"

namespace stsc {

constexpr int kNumClasses = 10;
constexpr int kImageH = 32;
constexpr int kImageW = 32;
constexpr int kImageBytes = 3 * kImageH * kImageW;

// images stay uint8 planar rgb in memory and scale to [0,1] on gather
struct Dataset {
  int n = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  // [n * kImageBytes]

  template <typename T>
  void gather(const int* idx, int count, T* out) const;
};

// batch files in the classic packed record format (label byte + planar rgb);
// when a checksums.txt sidecar is present every listed file is verified
Dataset load_dataset(const std::string& root, bool train);

std::vector<int> class_histogram(const Dataset& ds, const std::vector<int>& indices);

}  // namespace stsc
