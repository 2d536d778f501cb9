#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stsc/common.hpp"

namespace stsc {

struct ArrayInfo {
  std::string name;
  std::vector<int> shape;
  std::int64_t offset = 0;
  std::int64_t size = 0;
};

// Ordered name -> array map over one flat buffer.  Iteration order is the
// registration order and is identical for every pack built from the same
// layout, which is what checkpointing and federated averaging rely on.
class ParamLayout {
 public:
  int add(std::string name, std::vector<int> shape);

  bool has(std::string_view name) const { return index_.count(std::string(name)) > 0; }
  const ArrayInfo& at(std::string_view name) const;
  const ArrayInfo& at(int id) const { return arrays_.at(id); }
  int id_of(std::string_view name) const;

  const std::vector<ArrayInfo>& arrays() const { return arrays_; }
  std::int64_t total() const { return total_; }

  bool same_shapes(const ParamLayout& other) const;

 private:
  std::vector<ArrayInfo> arrays_;
  std::unordered_map<std::string, int> index_;
  std::int64_t total_ = 0;
};

template <typename T>
struct ParamPack {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<T> data;

  explicit ParamPack() = default;
  explicit ParamPack(std::shared_ptr<const ParamLayout> l)
      : layout(std::move(l)), data(static_cast<std::size_t>(layout->total()), T(0)) {}

  T* view(std::string_view name) { return data.data() + layout->at(name).offset; }
  const T* view(std::string_view name) const { return data.data() + layout->at(name).offset; }
  std::span<T> array(std::string_view name) {
    const auto& a = layout->at(name);
    return {data.data() + a.offset, static_cast<std::size_t>(a.size)};
  }
  std::span<const T> array(std::string_view name) const {
    const auto& a = layout->at(name);
    return {data.data() + a.offset, static_cast<std::size_t>(a.size)};
  }
};

template <typename To, typename From>
ParamPack<To> convert_pack(const ParamPack<From>& src) {
  ParamPack<To> dst(src.layout);
  for (std::size_t i = 0; i < src.data.size(); ++i) dst.data[i] = static_cast<To>(src.data[i]);
  return dst;
}

}  // namespace stsc
