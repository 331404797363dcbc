#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "csi/numerics/param_store.hpp"
#include "csi/numerics/tape.hpp"

namespace csi {

class NonDeterministicFunction : public std::runtime_error {
 public:
  explicit NonDeterministicFunction(const std::string& what) : std::runtime_error(what) {}
};

// Builds a scalar loss on the given tape from the parameters in the store.
using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares tape gradients against fourth-order central differences
// (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h over every parameter entry; relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check_detailed(const LossBuilder& build, ParamStore& params, double epsilon);
double grad_check(const LossBuilder& build, ParamStore& params, double epsilon);

}  // namespace csi
