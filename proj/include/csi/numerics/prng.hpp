#pragma once

#include <cstddef>
#include <cstdint>

namespace csi {

// SplitMix64. Uniform doubles are draw / 2^64, normals use Box-Muller.
// The sequence depends only on the seed, never on the platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;
  // In [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double gaussian() noexcept;
  // Uniform integer in [0, bound); bound must be positive.
  std::size_t below(std::size_t bound) noexcept;

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace csi
