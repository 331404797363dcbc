#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace csi {

class UnreachableOutcome : public std::domain_error {
 public:
  explicit UnreachableOutcome(const std::string& what) : std::domain_error(what) {}
};

// A finite latent variable z with prior p(z) and likelihood table p(y|z).
struct DiscreteLatentModel {
  std::vector<std::string> latent_values;
  std::vector<std::string> outcomes;
  std::vector<double> prior;                     // [z]
  std::vector<std::vector<double>> likelihood;   // [z][y]

  void validate() const;
  std::size_t outcome_index(const std::string& outcome) const;
};

// sum_z p(y|z) p(z)
double marginal(const DiscreteLatentModel& model, std::size_t outcome);
double marginal(const DiscreteLatentModel& model, const std::string& outcome);

// p(z|y) = p(y|z) p(z) / p(y)
std::vector<double> posterior(const DiscreteLatentModel& model, std::size_t outcome);
std::vector<double> posterior(const DiscreteLatentModel& model, const std::string& outcome);

// Two-position lever, two tracks. `fidelity` is p(end = lever side).
DiscreteLatentModel lever_model(double p_left = 0.5, double fidelity = 1.0);
std::string lever_demo(double p_left = 0.5, double fidelity = 1.0);

}  // namespace csi
