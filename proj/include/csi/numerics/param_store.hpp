#pragma once

#include <map>
#include <string>
#include <vector>

#include "csi/numerics/tensor.hpp"

namespace csi {

using Gradients = std::map<std::string, Tensor>;

// Named trainable parameters with a gradient slot of identical shape.
// Iteration order is the lexicographic order of names, which is also the
// order used by checkpoints.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const;
  const Tensor& value(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  Tensor& grad(const std::string& name);

  void zero_grads();
  // Adds every entry of `grads` into the matching gradient slot.
  void accumulate(const Gradients& grads, double weight = 1.0);

  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t element_count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
};

}  // namespace csi
