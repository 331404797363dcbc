#include "csi/training/optimizer.hpp"

#include <cmath>

#include "csi/numerics/errors.hpp"

namespace csi {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw ContractViolation("epochs and batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ContractViolation("learning_rate must be >= 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ContractViolation("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0) || !(grad_clip_norm > 0.0)) throw ContractViolation("adam_eps and grad_clip_norm must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},         {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"adam_beta1", adam_beta1}, {"adam_beta2", adam_beta2}, {"adam_eps", adam_eps},
          {"grad_clip_norm", grad_clip_norm}, {"seed", seed}};
}

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& name : params.names()) {
    for (double g : params.grad(name).values()) sq += g * g;
  }
  return std::sqrt(sq);
}

Adam::Adam(const TrainConfig& config) : config_(config) { config_.validate(); }

double Adam::step(ParamStore& params) {
  const double norm = global_grad_norm(params);
  const double clip = norm > config_.grad_clip_norm ? config_.grad_clip_norm / norm : 1.0;
  ++t_;
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Tensor& w = params.value(name);
    const Tensor& g = params.grad(name);
    Tensor& m = m_.try_emplace(name, Tensor(w.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(w.shape())).first->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = clip * g[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      w[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_eps);
    }
  }
  return norm;
}

}  // namespace csi
