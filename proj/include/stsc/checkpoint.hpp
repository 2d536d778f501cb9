#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "stsc/params.hpp"

namespace stsc {

// single-file container for a parameter pack: magic, version, a free-form
// JSON header, named shaped arrays, and a trailing crc32 over everything
template <typename T>
void save_checkpoint(const std::string& path, const ParamPack<T>& pack,
                     const nlohmann::json& header);

// layout may be null, in which case it is reconstructed from the file;
// otherwise names, shapes and order must match exactly
template <typename T>
ParamPack<T> load_checkpoint(const std::string& path,
                             std::shared_ptr<const ParamLayout> layout = nullptr,
                             nlohmann::json* header_out = nullptr);

nlohmann::json read_checkpoint_header(const std::string& path);

}  // namespace stsc
