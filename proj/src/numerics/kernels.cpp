#include "csi/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csi/numerics/errors.hpp"

namespace csi::kernels {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
  }
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.size() != 1) throw ContractViolation(std::string(op) + ": expected a single-element tensor");
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

// Softmax of `n` entries at stride `stride` starting at `offset`.
void softmax_lane(const Tensor& in, Tensor& out, std::size_t offset, std::size_t n, std::size_t stride,
                  const ExclusionMask* excluded) {
  double hi = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = offset + k * stride;
    if (excluded && (*excluded)[i]) continue;
    hi = std::max(hi, in[i]);
    any = true;
  }
  if (!any) throw EmptySupport("softmax over a row with every entry excluded");
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = offset + k * stride;
    if (excluded && (*excluded)[i]) {
      out[i] = 0.0;
      continue;
    }
    out[i] = std::exp(in[i] - hi);
    total += out[i];
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = offset + k * stride;
    if (excluded && (*excluded)[i]) continue;
    out[i] /= total;
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
      throw ContractViolation("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                              shape_string(b.shape()));
    }
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        const double* brow = pb + p * n;
        double* orow = po + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
    return out;
  }
  if (a.rank() == 2 && b.rank() == 1) {
    const std::size_t m = a.dim(0), k = a.dim(1);
    if (b.dim(0) != k) {
      throw ContractViolation("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                              shape_string(b.shape()));
    }
    Tensor out({m});
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* row = pa + i * k;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * pb[p];
      out[i] = acc;
    }
    return out;
  }
  if (a.rank() == 1 && b.rank() == 1) {
    require_same_shape(a, b, "matmul");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return Tensor::scalar(acc);
  }
  throw ContractViolation("matmul: unsupported ranks " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ContractViolation("transpose: expected a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  return map(a, [=](double x) { return scale * x + shift; });
}

Tensor add_scalar(const Tensor& a, const Tensor& s) {
  require_scalar(s, "add_scalar");
  const double v = s[0];
  return map(a, [=](double x) { return x + v; });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  require_scalar(s, "scale_by");
  const double v = s[0];
  return map(a, [=](double x) { return x * v; });
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
  if (m.rank() != 2 || bias.rank() != 1 || bias.dim(0) != m.dim(1)) {
    throw ContractViolation("add_row_bias: shape mismatch " + shape_string(m.shape()) + " + " +
                            shape_string(bias.shape()));
  }
  Tensor out = m;
  const std::size_t cols = m.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % cols];
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor tanh(const Tensor& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& a) {
  return map(a, [](double x) { return sigmoid(x); });
}

Tensor log(const Tensor& a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0)) throw ContractViolation("log: non-positive input");
  }
  return map(a, [](double x) { return std::log(x); });
}

Tensor log_clamped(const Tensor& a, double floor) {
  if (!(floor > 0.0)) throw ContractViolation("log_clamped: floor must be positive");
  return map(a, [=](double x) { return std::log(std::max(x, floor)); });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  Tensor out(a.shape());
  if (a.rank() == 1) {
    if (axis != 0) throw ContractViolation("softmax: axis out of range");
    softmax_lane(a, out, 0, a.size(), 1, nullptr);
  } else if (a.rank() == 2) {
    const std::size_t r = a.dim(0), c = a.dim(1);
    if (axis == 1) {
      for (std::size_t i = 0; i < r; ++i) softmax_lane(a, out, i * c, c, 1, nullptr);
    } else if (axis == 0) {
      for (std::size_t j = 0; j < c; ++j) softmax_lane(a, out, j, r, c, nullptr);
    } else {
      throw ContractViolation("softmax: axis out of range");
    }
  } else {
    throw ContractViolation("softmax: rank must be 1 or 2");
  }
  return out;
}

Tensor masked_softmax(const Tensor& a, const ExclusionMask& excluded) {
  if (excluded.size() != a.size()) throw ContractViolation("masked_softmax: mask length does not match input");
  Tensor out(a.shape());
  if (a.rank() == 1) {
    softmax_lane(a, out, 0, a.size(), 1, &excluded);
  } else if (a.rank() == 2) {
    const std::size_t r = a.dim(0), c = a.dim(1);
    for (std::size_t i = 0; i < r; ++i) softmax_lane(a, out, i * c, c, 1, &excluded);
  } else {
    throw ContractViolation("masked_softmax: rank must be 1 or 2");
  }
  return out;
}

Tensor concat(std::span<const Tensor* const> parts, std::size_t axis) {
  if (parts.empty()) throw ContractViolation("concat: no inputs");
  const std::size_t rank = parts[0]->rank();
  for (const Tensor* p : parts) {
    if (p->rank() != rank) throw ContractViolation("concat: rank mismatch");
  }
  if (rank == 1) {
    if (axis != 0) throw ContractViolation("concat: axis out of range");
    std::vector<double> data;
    for (const Tensor* p : parts) data.insert(data.end(), p->values().begin(), p->values().end());
    return Tensor::vector(std::move(data));
  }
  if (rank != 2) throw ContractViolation("concat: rank must be 1 or 2");
  if (axis == 0) {
    const std::size_t cols = parts[0]->dim(1);
    std::size_t rows = 0;
    std::vector<double> data;
    for (const Tensor* p : parts) {
      if (p->dim(1) != cols) throw ContractViolation("concat: column mismatch along axis 0");
      rows += p->dim(0);
      data.insert(data.end(), p->values().begin(), p->values().end());
    }
    return Tensor({rows, cols}, std::move(data));
  }
  if (axis != 1) throw ContractViolation("concat: axis out of range");
  const std::size_t rows = parts[0]->dim(0);
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    if (p->dim(0) != rows) throw ContractViolation("concat: row mismatch along axis 1");
    cols += p->dim(1);
  }
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const Tensor* p : parts) {
      const std::size_t c = p->dim(1);
      std::copy_n(p->data() + r * c, c, out.data() + r * cols + offset);
      offset += c;
    }
  }
  return out;
}

Tensor stack(std::span<const Tensor* const> rows) {
  if (rows.empty()) throw ContractViolation("stack: no inputs");
  const std::size_t width = rows[0]->size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  for (const Tensor* r : rows) {
    if (r->rank() != 1 || r->size() != width) throw ContractViolation("stack: inputs must be equal-length vectors");
    data.insert(data.end(), r->values().begin(), r->values().end());
  }
  return Tensor({rows.size(), width}, std::move(data));
}

Tensor embedding(const Tensor& table, std::size_t index) {
  if (table.rank() != 2) throw ContractViolation("embedding: table must be a matrix");
  if (index >= table.dim(0)) throw ContractViolation("embedding: index " + std::to_string(index) + " out of range");
  const std::size_t cols = table.dim(1);
  std::vector<double> row(table.data() + index * cols, table.data() + (index + 1) * cols);
  return Tensor::vector(std::move(row));
}

Tensor slice(const Tensor& v, std::size_t start, std::size_t length) {
  if (v.rank() != 1 || length == 0 || start + length > v.size()) throw ContractViolation("slice: range out of bounds");
  return Tensor::vector(std::vector<double>(v.data() + start, v.data() + start + length));
}

Tensor pick(const Tensor& v, std::size_t index) {
  if (index >= v.size()) throw ContractViolation("pick: index out of range");
  return Tensor::scalar(v[index]);
}

Tensor scatter_add(const Tensor& v, std::span<const std::size_t> ids, std::size_t size) {
  if (v.rank() != 1 || ids.size() != v.size()) throw ContractViolation("scatter_add: id count must match input length");
  Tensor out({size});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= size) throw ContractViolation("scatter_add: target id out of range");
    out[ids[i]] += v[i];
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) throw ContractViolation("reshape: element count changes");
  return Tensor(std::move(shape), a.storage());
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return Tensor::scalar(acc);
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return Tensor::scalar(acc / static_cast<double>(a.size()));
}

}  // namespace csi::kernels
