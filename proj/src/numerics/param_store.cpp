#include "csi/numerics/param_store.hpp"

#include "csi/numerics/errors.hpp"

namespace csi {

void ParamStore::add(const std::string& name, Tensor value) {
  if (name.empty()) throw ContractViolation("parameter name must be non-empty");
  if (entries_.count(name)) throw ContractViolation("duplicate parameter name: " + name);
  Tensor grad(value.shape());
  entries_.emplace(name, Entry{std::move(value), std::move(grad)});
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) != 0; }

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }
const Tensor& ParamStore::grad(const std::string& name) const { return entry(name).grad; }
Tensor& ParamStore::grad(const std::string& name) { return entry(name).grad; }

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::accumulate(const Gradients& grads, double weight) {
  for (const auto& [name, g] : grads) {
    Tensor& slot = entry(name).grad;
    if (slot.shape() != g.shape()) throw ContractViolation("gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += weight * g[i];
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !bit_identical(ia->second.value, ib->second.value)) return false;
  }
  return true;
}

}  // namespace csi
