#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "csi/numerics/param_store.hpp"

namespace csi {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;

  // learning_rate may be 0 (a no-op run); everything else must be positive.
  void validate() const;
  nlohmann::json to_json() const;
};

// Adam over every parameter in a store, with global-norm gradient clipping.
class Adam {
 public:
  explicit Adam(const TrainConfig& config);

  // Applies one update from the gradient slots; returns the pre-clip norm.
  double step(ParamStore& params);
  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

double global_grad_norm(const ParamStore& params);

}  // namespace csi
