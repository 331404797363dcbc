#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "csi/numerics/param_store.hpp"

namespace csi {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

struct Checkpoint {
  ParamStore params;
  nlohmann::json config;
};

// Container layout:
//   "CSICKPT1"
//   u64 little-endian header length, then UTF-8 JSON
//     {"params": [{"name", "shape"}...], "config": {...}}
//   float64 little-endian tensor data, in header order
std::string encode_checkpoint(const ParamStore& params, const nlohmann::json& config);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace csi
