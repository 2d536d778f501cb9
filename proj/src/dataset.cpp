#include "stsc/dataset.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace stsc {

namespace {

constexpr int kRecordBytes = 1 + kImageBytes;
constexpr int kImagesPerFile = 10000;
constexpr std::size_t kFileBytes = static_cast<std::size_t>(kRecordBytes) * kImagesPerFile;

std::vector<std::string> batch_files(bool train) {
  if (!train) return {"test_batch.bin"};
  std::vector<std::string> files;
  for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
  return files;
}

std::uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<io_error>(in.good(), "cannot open " + path);
  auto crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
  return static_cast<std::uint32_t>(crc);
}

void verify_checksums(const std::filesystem::path& root) {
  auto manifest = root / "checksums.txt";
  if (!std::filesystem::exists(manifest)) return;
  std::ifstream in(manifest);
  require<io_error>(in.good(), "cannot open " + manifest.string());
  std::string line;
  int verified = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string hex, name;
    require<io_error>(static_cast<bool>(row >> hex >> name),
                      "malformed line in " + manifest.string() + ": " + line);
    auto target = root / name;
    if (!std::filesystem::exists(target)) continue;
    std::uint32_t want = 0;
    require<io_error>(std::sscanf(hex.c_str(), "%8x", &want) == 1,
                      "bad checksum value in " + manifest.string() + ": " + hex);
    require<io_error>(file_crc32(target.string()) == want,
                      "checksum mismatch for " + target.string() +
                          " (corrupt or stale data files)");
    ++verified;
  }
  require<io_error>(verified > 0, manifest.string() + " listed no present files");
}

}  // namespace

Dataset load_dataset(const std::string& root_str, bool train) {
  std::filesystem::path root(root_str);
  auto files = batch_files(train);
  for (const auto& f : files)
    require<io_error>(std::filesystem::exists(root / f),
                      "missing data file " + (root / f).string() +
                          "; generate a corpus with: stsc-datagen --out " + root_str);
  verify_checksums(root);

  Dataset ds;
  ds.n = static_cast<int>(files.size()) * kImagesPerFile;
  ds.labels.resize(ds.n);
  ds.pixels.resize(static_cast<std::size_t>(ds.n) * kImageBytes);
  int at = 0;
  for (const auto& f : files) {
    auto path = (root / f).string();
    std::error_code ec;
    auto size = std::filesystem::file_size(root / f, ec);
    require<io_error>(!ec && size == kFileBytes,
                      path + " has wrong size " + std::to_string(size) + ", expected " +
                          std::to_string(kFileBytes));
    std::ifstream in(path, std::ios::binary);
    require<io_error>(in.good(), "cannot open " + path);
    for (int i = 0; i < kImagesPerFile; ++i, ++at) {
      char label;
      in.read(&label, 1);
      in.read(reinterpret_cast<char*>(ds.pixels.data() +
                                      static_cast<std::size_t>(at) * kImageBytes),
              kImageBytes);
      require<io_error>(in.good(), "short read in " + path);
      auto lv = static_cast<std::uint8_t>(label);
      require<io_error>(lv < kNumClasses,
                        "label " + std::to_string(lv) + " out of range in " + path);
      ds.labels[at] = lv;
    }
  }
  return ds;
}

template <typename T>
void Dataset::gather(const int* idx, int count, T* out) const {
  constexpr T scale = static_cast<T>(1.0 / 255.0);
  for (int i = 0; i < count; ++i) {
    require<shape_error>(idx[i] >= 0 && idx[i] < n, "image index out of range");
    const std::uint8_t* src = pixels.data() + static_cast<std::size_t>(idx[i]) * kImageBytes;
    T* dst = out + static_cast<std::size_t>(i) * kImageBytes;
    for (int j = 0; j < kImageBytes; ++j) dst[j] = static_cast<T>(src[j]) * scale;
  }
}

template void Dataset::gather<float>(const int*, int, float*) const;
template void Dataset::gather<double>(const int*, int, double*) const;

std::vector<int> class_histogram(const Dataset& ds, const std::vector<int>& indices) {
  std::vector<int> hist(kNumClasses, 0);
  for (int i : indices) {
    require<shape_error>(i >= 0 && i < ds.n, "image index out of range");
    ++hist[ds.labels[i]];
  }
  return hist;
}

}  // namespace stsc
