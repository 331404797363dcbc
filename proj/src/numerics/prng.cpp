#include "csi/numerics/prng.hpp"

#include <cmath>
#include <numbers>

namespace csi {

std::uint64_t Prng::next_u64() noexcept {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Prng::uniform() noexcept {
  // 2^-64; the product can round up to 1.0 for draws within 2^10 of the top.
  const double u = static_cast<double>(next_u64()) * 0x1.0p-64;
  return u < 1.0 ? u : 0x1.fffffffffffffp-1;
}

double Prng::gaussian() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Prng::below(std::size_t bound) noexcept {
  return static_cast<std::size_t>(uniform() * static_cast<double>(bound)) % bound;
}

}  // namespace csi
