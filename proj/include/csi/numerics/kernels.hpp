#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "csi/numerics/tensor.hpp"

// Forward kernels shared by eager code and the autodiff tape. Every kernel
// validates shapes and throws ContractViolation on mismatch.
namespace csi::kernels {

// Nonzero entries mark positions that must receive exactly zero probability.
using ExclusionMask = std::vector<std::uint8_t>;

// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k] -> [1].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// scale * a + shift, elementwise.
Tensor affine(const Tensor& a, double scale, double shift);
// a + s where s has shape {1}.
Tensor add_scalar(const Tensor& a, const Tensor& s);
// a * s where s has shape {1}.
Tensor scale_by(const Tensor& a, const Tensor& s);
// m[r, :] + bias for every row r.
Tensor add_row_bias(const Tensor& m, const Tensor& bias);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
double sigmoid(double x) noexcept;
// Natural log; requires every entry > 0.
Tensor log(const Tensor& a);
// log(max(a, floor)); floor must be positive.
Tensor log_clamped(const Tensor& a, double floor);

Tensor softmax(const Tensor& a, std::size_t axis);
// Softmax along the last axis; excluded entries are exactly 0 and the rest
// renormalize. Throws EmptySupport when a row has no included entry.
Tensor masked_softmax(const Tensor& a, const ExclusionMask& excluded);

Tensor concat(std::span<const Tensor* const> parts, std::size_t axis);
// Stacks equal-length vectors into a [count, length] matrix.
Tensor stack(std::span<const Tensor* const> rows);
Tensor embedding(const Tensor& table, std::size_t index);
Tensor slice(const Tensor& v, std::size_t start, std::size_t length);
Tensor pick(const Tensor& v, std::size_t index);
// out[ids[i]] += v[i], out has `size` entries.
Tensor scatter_add(const Tensor& v, std::span<const std::size_t> ids, std::size_t size);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

}  // namespace csi::kernels
