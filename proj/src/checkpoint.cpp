#include "stsc/checkpoint.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "stsc/common.hpp"

namespace stsc {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'S', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::string& buf, U v) {
  static_assert(std::is_trivially_copyable_v<U>);
  buf.append(reinterpret_cast<const char*>(&v), sizeof(U));
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  auto crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt chunks
  while (n > 0) {
    uInt chunk = n > (1u << 30) ? (1u << 30) : static_cast<uInt>(n);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Cursor {
  const char* p;
  std::size_t left;

  void need(std::size_t n) const {
    require<io_error>(left >= n, "checkpoint truncated mid-record");
  }
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, p, sizeof(U));
    p += sizeof(U);
    left -= sizeof(U);
    return v;
  }
  std::string get_str(std::size_t n) {
    need(n);
    std::string s(p, n);
    p += n;
    left -= n;
    return s;
  }
  const char* get_raw(std::size_t n) {
    need(n);
    const char* q = p;
    p += n;
    left -= n;
    return q;
  }
};

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return std::is_same_v<T, float> ? 1 : 2;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const ParamPack<T>& pack,
                     const nlohmann::json& header) {
  require<shape_error>(pack.layout != nullptr, "cannot save a pack without a layout");
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put(buf, kVersion);
  std::string hdr = header.dump();
  put(buf, static_cast<std::uint32_t>(hdr.size()));
  buf += hdr;
  const auto& arrays = pack.layout->arrays();
  put(buf, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    require<io_error>(a.name.size() <= 0xffff, "parameter name too long for checkpoint");
    put(buf, static_cast<std::uint16_t>(a.name.size()));
    buf += a.name;
    put(buf, dtype_tag<T>());
    put(buf, static_cast<std::uint8_t>(a.shape.size()));
    for (int d : a.shape) put(buf, static_cast<std::uint32_t>(d));
    std::uint64_t nbytes = static_cast<std::uint64_t>(a.size) * sizeof(T);
    put(buf, nbytes);
    buf.append(reinterpret_cast<const char*>(pack.data.data() + a.offset), nbytes);
  }
  put(buf, crc_of(buf.data(), buf.size()));

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require<io_error>(out.good(), "cannot open " + tmp + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require<io_error>(out.good(), "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require<io_error>(!ec, "cannot move checkpoint into place: " + ec.message());
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<io_error>(in.good(), "cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require<io_error>(in.good() || in.eof(), "read failure on " + path);
  return data;
}

Cursor open_checked(const std::string& data) {
  require<io_error>(data.size() >= sizeof(kMagic) + 4 + 4 + 4 + 4,
                    "checkpoint too short to be valid");
  require<io_error>(std::memcmp(data.data(), kMagic, sizeof(kMagic)) == 0,
                    "not a checkpoint file (bad magic)");
  std::uint32_t stored;
  std::memcpy(&stored, data.data() + data.size() - 4, 4);
  require<io_error>(stored == crc_of(data.data(), data.size() - 4),
                    "checkpoint integrity check failed (crc mismatch)");
  Cursor cur{data.data() + sizeof(kMagic), data.size() - sizeof(kMagic) - 4};
  auto version = cur.get<std::uint32_t>();
  require<io_error>(version == kVersion,
                    "unsupported checkpoint version " + std::to_string(version));
  return cur;
}

}  // namespace

nlohmann::json read_checkpoint_header(const std::string& path) {
  std::string data = slurp(path);
  Cursor cur = open_checked(data);
  auto hdr_len = cur.get<std::uint32_t>();
  auto hdr = cur.get_str(hdr_len);
  auto parsed = nlohmann::json::parse(hdr, nullptr, false);
  require<io_error>(!parsed.is_discarded(), "checkpoint header is not valid json");
  return parsed;
}

template <typename T>
ParamPack<T> load_checkpoint(const std::string& path,
                             std::shared_ptr<const ParamLayout> layout,
                             nlohmann::json* header_out) {
  std::string data = slurp(path);
  Cursor cur = open_checked(data);
  auto hdr_len = cur.get<std::uint32_t>();
  auto hdr = cur.get_str(hdr_len);
  if (header_out) {
    auto parsed = nlohmann::json::parse(hdr, nullptr, false);
    require<io_error>(!parsed.is_discarded(), "checkpoint header is not valid json");
    *header_out = std::move(parsed);
  }
  auto n_arrays = cur.get<std::uint32_t>();

  struct Rec {
    std::string name;
    std::uint8_t dtype;
    std::vector<int> shape;
    const char* bytes;
    std::int64_t count;
  };
  std::vector<Rec> recs;
  recs.reserve(n_arrays);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    Rec r;
    auto name_len = cur.get<std::uint16_t>();
    r.name = cur.get_str(name_len);
    r.dtype = cur.get<std::uint8_t>();
    require<io_error>(r.dtype == 1 || r.dtype == 2,
                      "unknown dtype tag in checkpoint array " + r.name);
    auto ndim = cur.get<std::uint8_t>();
    std::int64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      auto dim = cur.get<std::uint32_t>();
      require<io_error>(dim > 0, "zero dimension in checkpoint array " + r.name);
      r.shape.push_back(static_cast<int>(dim));
      count *= dim;
    }
    auto nbytes = cur.get<std::uint64_t>();
    std::uint64_t elem = r.dtype == 1 ? 4 : 8;
    require<io_error>(nbytes == static_cast<std::uint64_t>(count) * elem,
                      "byte count does not match shape for " + r.name);
    r.bytes = cur.get_raw(nbytes);
    r.count = count;
    recs.push_back(std::move(r));
  }
  require<io_error>(cur.left == 0, "trailing bytes after checkpoint payload");

  if (!layout) {
    auto fresh = std::make_shared<ParamLayout>();
    for (const auto& r : recs) fresh->add(r.name, r.shape);
    layout = std::move(fresh);
  } else {
    const auto& arrays = layout->arrays();
    require<io_error>(arrays.size() == recs.size(),
                      "checkpoint array count does not match the expected layout");
    for (std::size_t i = 0; i < recs.size(); ++i) {
      require<io_error>(arrays[i].name == recs[i].name,
                        "checkpoint array order mismatch at " + recs[i].name);
      require<io_error>(arrays[i].shape == recs[i].shape,
                        "checkpoint shape mismatch for " + recs[i].name);
    }
  }

  ParamPack<T> pack(layout);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    T* dst = pack.data.data() + layout->arrays()[i].offset;
    // records are not aligned inside the file, so stage through a copy
    if (r.dtype == 1) {
      std::vector<float> tmp(r.count);
      std::memcpy(tmp.data(), r.bytes, tmp.size() * sizeof(float));
      for (std::int64_t j = 0; j < r.count; ++j) dst[j] = static_cast<T>(tmp[j]);
    } else {
      std::vector<double> tmp(r.count);
      std::memcpy(tmp.data(), r.bytes, tmp.size() * sizeof(double));
      for (std::int64_t j = 0; j < r.count; ++j) dst[j] = static_cast<T>(tmp[j]);
    }
  }
  return pack;
}

template void save_checkpoint<float>(const std::string&, const ParamPack<float>&,
                                     const nlohmann::json&);
template void save_checkpoint<double>(const std::string&, const ParamPack<double>&,
                                      const nlohmann::json&);
template ParamPack<float> load_checkpoint<float>(const std::string&,
                                                 std::shared_ptr<const ParamLayout>,
                                                 nlohmann::json*);
template ParamPack<double> load_checkpoint<double>(const std::string&,
                                                   std::shared_ptr<const ParamLayout>,
                                                   nlohmann::json*);

}  // namespace stsc
