#include "csi/inference/latent.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "csi/numerics/errors.hpp"

namespace csi {

namespace {

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractViolation(what + " has an entry outside [0, 1]");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ContractViolation(what + " does not sum to 1");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void DiscreteLatentModel::validate() const {
  if (latent_values.empty() || outcomes.empty()) throw ContractViolation("latent model needs values and outcomes");
  if (prior.size() != latent_values.size() || likelihood.size() != latent_values.size()) {
    throw ContractViolation("prior and likelihood must have one entry per latent value");
  }
  check_distribution(prior, "prior");
  for (std::size_t z = 0; z < likelihood.size(); ++z) {
    if (likelihood[z].size() != outcomes.size()) throw ContractViolation("likelihood row has the wrong length");
    check_distribution(likelihood[z], "likelihood row " + latent_values[z]);
  }
}

std::size_t DiscreteLatentModel::outcome_index(const std::string& outcome) const {
  for (std::size_t y = 0; y < outcomes.size(); ++y) {
    if (outcomes[y] == outcome) return y;
  }
  throw ContractViolation("unknown outcome: " + outcome);
}

double marginal(const DiscreteLatentModel& model, std::size_t outcome) {
  model.validate();
  if (outcome >= model.outcomes.size()) throw ContractViolation("outcome index out of range");
  double p = 0.0;
  for (std::size_t z = 0; z < model.prior.size(); ++z) p += model.likelihood[z][outcome] * model.prior[z];
  return p;
}

double marginal(const DiscreteLatentModel& model, const std::string& outcome) {
  return marginal(model, model.outcome_index(outcome));
}

std::vector<double> posterior(const DiscreteLatentModel& model, std::size_t outcome) {
  const double evidence = marginal(model, outcome);
  if (evidence <= 0.0) throw UnreachableOutcome("unreachable outcome: " + model.outcomes[outcome]);
  std::vector<double> post(model.prior.size());
  for (std::size_t z = 0; z < post.size(); ++z) post[z] = model.likelihood[z][outcome] * model.prior[z] / evidence;
  return post;
}

std::vector<double> posterior(const DiscreteLatentModel& model, const std::string& outcome) {
  return posterior(model, model.outcome_index(outcome));
}

DiscreteLatentModel lever_model(double p_left, double fidelity) {
  DiscreteLatentModel m;
  m.latent_values = {"left", "right"};
  m.outcomes = {"left", "right"};
  m.prior = {p_left, 1.0 - p_left};
  m.likelihood = {{fidelity, 1.0 - fidelity}, {1.0 - fidelity, fidelity}};
  m.validate();
  return m;
}

std::string lever_demo(double p_left, double fidelity) {
  const DiscreteLatentModel m = lever_model(p_left, fidelity);
  std::ostringstream out;
  out << "lever model\n";
  out << "  prior: p(lever=left) = " << fmt(m.prior[0]) << ", p(lever=right) = " << fmt(m.prior[1]) << "\n";
  out << "  track fidelity: p(end = lever side) = " << fmt(fidelity) << "\n";
  out << "forward inference\n";
  for (std::size_t y = 0; y < m.outcomes.size(); ++y) {
    out << "  p(end=" << m.outcomes[y] << ") = " << fmt(marginal(m, y)) << "\n";
  }
  out << "backward inference\n";
  for (std::size_t y = 0; y < m.outcomes.size(); ++y) {
    out << "  observed end=" << m.outcomes[y] << ":";
    if (marginal(m, y) <= 0.0) {
      out << " unreachable\n";
      continue;
    }
    const auto post = posterior(m, y);
    for (std::size_t z = 0; z < post.size(); ++z) {
      out << (z ? "," : "") << " p(lever=" << m.latent_values[z] << ") = " << fmt(post[z]);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace csi
