#include "csi/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "csi/numerics/errors.hpp"

namespace csi {

namespace {

double evaluate(const LossBuilder& build, const ParamStore& params) {
  Tape tape;
  return build(tape, params).value().item();
}

}  // namespace

GradCheckResult grad_check_detailed(const LossBuilder& build, ParamStore& params, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractViolation("grad_check: epsilon must be positive");

  const double first = evaluate(build, params);
  const double second = evaluate(build, params);
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    throw NonDeterministicFunction("grad_check: two forward passes disagree");
  }

  Gradients analytic;
  {
    Tape tape;
    Var loss = build(tape, params);
    analytic = tape.backward(loss);
  }

  GradCheckResult result;
  for (const std::string& name : params.names()) {
    Tensor& value = params.value(name);
    const auto it = analytic.find(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      auto at = [&](double offset) {
        value[i] = saved + offset;
        return evaluate(build, params);
      };
      const double near = at(epsilon) - at(-epsilon);
      const double far = at(2.0 * epsilon) - at(-2.0 * epsilon);
      value[i] = saved;

      const double numeric = (8.0 * near - far) / (12.0 * epsilon);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_relative_error) {
        result = {err, name, i, a, numeric};
      }
    }
  }
  return result;
}

double grad_check(const LossBuilder& build, ParamStore& params, double epsilon) {
  return grad_check_detailed(build, params, epsilon).max_relative_error;
}

}  // namespace csi
