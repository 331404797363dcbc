#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csi/numerics/prng.hpp"
#include "csi/numerics/tensor.hpp"

namespace csi::testing {

inline Tensor random_tensor(Prng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string golden_path(const std::string& name) { return std::string(CSI_GOLDEN_DIR) + "/" + name; }

// Compares against a committed golden file. With CSI_UPDATE_GOLDEN=1 in the
// environment the file is rewritten instead.
inline bool matches_golden(const std::string& name, const std::string& actual, std::string* diagnostic = nullptr) {
  const std::string path = golden_path(name);
  if (const char* update = std::getenv("CSI_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return true;
  }
  const std::string expected = read_file(path);
  if (expected == actual) return true;
  if (diagnostic) {
    std::size_t i = 0;
    while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
    *diagnostic = name + ": first differing byte at offset " + std::to_string(i) + " (expected size " +
                  std::to_string(expected.size()) + ", actual size " + std::to_string(actual.size()) + ")";
  }
  return false;
}

}  // namespace csi::testing
