#include "stsc/params.hpp"

namespace stsc {

int ParamLayout::add(std::string name, std::vector<int> shape) {
  require<shape_error>(!index_.count(name), "duplicate parameter name: " + name);
  std::int64_t size = 1;
  for (int d : shape) {
    require<shape_error>(d > 0, "non-positive dimension in " + name);
    size *= d;
  }
  ArrayInfo info{std::move(name), std::move(shape), total_, size};
  index_.emplace(info.name, static_cast<int>(arrays_.size()));
  arrays_.push_back(std::move(info));
  total_ += size;
  return static_cast<int>(arrays_.size()) - 1;
}

const ArrayInfo& ParamLayout::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  require<shape_error>(it != index_.end(), "unknown parameter name: " + std::string(name));
  return arrays_[it->second];
}

int ParamLayout::id_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  require<shape_error>(it != index_.end(), "unknown parameter name: " + std::string(name));
  return it->second;
}

bool ParamLayout::same_shapes(const ParamLayout& other) const {
  if (arrays_.size() != other.arrays_.size()) return false;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name != other.arrays_[i].name) return false;
    if (arrays_[i].shape != other.arrays_[i].shape) return false;
  }
  return true;
}

}  // namespace stsc
