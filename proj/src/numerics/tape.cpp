#include "csi/numerics/tape.hpp"

#include <algorithm>

#include "csi/numerics/errors.hpp"

namespace csi {

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Affine: return "affine";
    case Op::AddScalar: return "add_scalar";
    case Op::ScaleBy: return "scale_by";
    case Op::AddRowBias: return "add_row_bias";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::LogClamped: return "log_clamped";
    case Op::Softmax: return "softmax";
    case Op::MaskedSoftmax: return "masked_softmax";
    case Op::Concat: return "concat";
    case Op::Stack: return "stack";
    case Op::Embedding: return "embedding";
    case Op::Slice: return "slice";
    case Op::Pick: return "pick";
    case Op::ScatterAdd: return "scatter_add";
    case Op::Reshape: return "reshape";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!tape) throw ContractViolation("variable is not bound to a tape");
  return tape->value(*this);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return Var{this, it->second};
  Node n;
  n.op = Op::Param;
  n.ref = &store.value(name);
  n.param = name;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  bound_.emplace(name, id);
  return Var{this, id};
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw ContractViolation("variable does not belong to this tape");
  return node_value(nodes_[v.id]);
}

Var Tape::record(Op op, std::vector<std::uint32_t> inputs, OpAttr attr) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.attr = std::move(attr);
  std::vector<const Tensor*> in;
  in.reserve(n.inputs.size());
  for (std::uint32_t id : n.inputs) {
    if (id >= nodes_.size()) throw ContractViolation("tape input refers to a later node");
    in.push_back(&node_value(nodes_[id]));
    n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
  }
  n.value = compute(n, in);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::compute(const Node& n, const std::vector<const Tensor*>& in) const {
  namespace k = kernels;
  const OpAttr& a = n.attr;
  switch (n.op) {
    case Op::Constant:
    case Op::Param: return node_value(n);
    case Op::MatMul: return k::matmul(*in[0], *in[1]);
    case Op::Transpose: return k::transpose(*in[0]);
    case Op::Add: return k::add(*in[0], *in[1]);
    case Op::Sub: return k::sub(*in[0], *in[1]);
    case Op::Mul: return k::mul(*in[0], *in[1]);
    case Op::Affine: return k::affine(*in[0], a.scale, a.shift);
    case Op::AddScalar: return k::add_scalar(*in[0], *in[1]);
    case Op::ScaleBy: return k::scale_by(*in[0], *in[1]);
    case Op::AddRowBias: return k::add_row_bias(*in[0], *in[1]);
    case Op::Tanh: return k::tanh(*in[0]);
    case Op::Sigmoid: return k::sigmoid(*in[0]);
    case Op::Log: return k::log(*in[0]);
    case Op::LogClamped: return k::log_clamped(*in[0], a.scale);
    case Op::Softmax: return k::softmax(*in[0], a.axis);
    case Op::MaskedSoftmax: return k::masked_softmax(*in[0], a.mask);
    case Op::Concat: return k::concat(in, a.axis);
    case Op::Stack: return k::stack(in);
    case Op::Embedding: return k::embedding(*in[0], a.start);
    case Op::Slice: return k::slice(*in[0], a.start, a.length);
    case Op::Pick: return k::pick(*in[0], a.start);
    case Op::ScatterAdd: return k::scatter_add(*in[0], a.ids, a.length);
    case Op::Reshape: return k::reshape(*in[0], a.shape);
    case Op::Sum: return k::sum(*in[0]);
    case Op::Mean: return k::mean(*in[0]);
  }
  throw ContractViolation("unknown tape op");
}

namespace {

Tensor& slot(std::vector<Tensor>& grads, std::uint32_t id, const Shape& shape) {
  Tensor& g = grads[id];
  if (g.empty()) g = Tensor(shape);
  return g;
}

void softmax_lane_grad(const Tensor& y, const Tensor& g, Tensor& ga, std::size_t offset, std::size_t n,
                       std::size_t stride) {
  double dot = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = offset + k * stride;
    dot += g[i] * y[i];
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = offset + k * stride;
    ga[i] += y[i] * (g[i] - dot);
  }
}

}  // namespace

void Tape::propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
  auto input = [&](std::size_t k) -> const Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return input(k).needs_grad; };
  auto grad_of = [&](std::size_t k) -> Tensor& { return slot(grads, n.inputs[k], node_value(input(k)).shape()); };
  const Tensor& y = n.value;
  const OpAttr& a = n.attr;

  switch (n.op) {
    case Op::Constant:
    case Op::Param: return;
    case Op::MatMul: {
      const Tensor& x = node_value(input(0));
      const Tensor& w = node_value(input(1));
      if (x.rank() == 2 && w.rank() == 2) {
        const std::size_t m = x.dim(0), kk = x.dim(1), nn = w.dim(1);
        if (wants(0)) {
          Tensor& gx = grad_of(0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < nn; ++j) acc += g[i * nn + j] * w[p * nn + j];
              gx[i * kk + p] += acc;
            }
        }
        if (wants(1)) {
          Tensor& gw = grad_of(1);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              const double xv = x[i * kk + p];
              for (std::size_t j = 0; j < nn; ++j) gw[p * nn + j] += xv * g[i * nn + j];
            }
        }
      } else if (x.rank() == 2) {
        const std::size_t m = x.dim(0), kk = x.dim(1);
        if (wants(0)) {
          Tensor& gx = grad_of(0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) gx[i * kk + p] += g[i] * w[p];
        }
        if (wants(1)) {
          Tensor& gw = grad_of(1);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) gw[p] += x[i * kk + p] * g[i];
        }
      } else {
        const double g0 = g[0];
        if (wants(0)) {
          Tensor& gx = grad_of(0);
          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g0 * w[i];
        }
        if (wants(1)) {
          Tensor& gw = grad_of(1);
          for (std::size_t i = 0; i < w.size(); ++i) gw[i] += g0 * x[i];
        }
      }
      return;
    }
    case Op::Transpose: {
      Tensor& gx = grad_of(0);
      const std::size_t r = y.dim(0), c = y.dim(1);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[j * r + i] += g[i * c + j];
      return;
    }
    case Op::Add:
    case Op::Sub: {
      const double sign = n.op == Op::Add ? 1.0 : -1.0;
      if (wants(0)) {
        Tensor& gx = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gy = grad_of(1);
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += sign * g[i];
      }
      return;
    }
    case Op::Mul: {
      const Tensor& x = node_value(input(0));
      const Tensor& z = node_value(input(1));
      if (wants(0)) {
        Tensor& gx = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * z[i];
      }
      if (wants(1)) {
        Tensor& gz = grad_of(1);
        for (std::size_t i = 0; i < g.size(); ++i) gz[i] += g[i] * x[i];
      }
      return;
    }
    case Op::Affine: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a.scale * g[i];
      return;
    }
    case Op::AddScalar: {
      if (wants(0)) {
        Tensor& gx = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants(1)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
        grad_of(1)[0] += acc;
      }
      return;
    }
    case Op::ScaleBy: {
      const Tensor& x = node_value(input(0));
      const double s = node_value(input(1))[0];
      if (wants(0)) {
        Tensor& gx = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
      }
      if (wants(1)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
        grad_of(1)[0] += acc;
      }
      return;
    }
    case Op::AddRowBias: {
      const std::size_t cols = y.dim(1);
      if (wants(0)) {
        Tensor& gx = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
      }
      return;
    }
    case Op::Tanh: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::Sigmoid: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case Op::Log: {
      const Tensor& x = node_value(input(0));
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
      return;
    }
    case Op::LogClamped: {
      const Tensor& x = node_value(input(0));
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > a.scale) gx[i] += g[i] / x[i];
      }
      return;
    }
    case Op::Softmax: {
      Tensor& gx = grad_of(0);
      if (y.rank() == 1) {
        softmax_lane_grad(y, g, gx, 0, y.size(), 1);
      } else if (a.axis == 1) {
        const std::size_t r = y.dim(0), c = y.dim(1);
        for (std::size_t i = 0; i < r; ++i) softmax_lane_grad(y, g, gx, i * c, c, 1);
      } else {
        const std::size_t r = y.dim(0), c = y.dim(1);
        for (std::size_t j = 0; j < c; ++j) softmax_lane_grad(y, g, gx, j, r, c);
      }
      return;
    }
    case Op::MaskedSoftmax: {
      // Excluded entries have y == 0, so the standard rule leaves them at 0.
      Tensor& gx = grad_of(0);
      const std::size_t c = y.shape().back();
      for (std::size_t off = 0; off < y.size(); off += c) softmax_lane_grad(y, g, gx, off, c, 1);
      return;
    }
    case Op::Concat: {
      if (y.rank() == 1 || a.axis == 0) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t len = node_value(input(k)).size();
          if (wants(k)) {
            Tensor& gx = grad_of(k);
            for (std::size_t i = 0; i < len; ++i) gx[i] += g[offset + i];
          }
          offset += len;
        }
      } else {
        const std::size_t rows = y.dim(0), cols = y.dim(1);
        std::size_t col_offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t c = node_value(input(k)).dim(1);
          if (wants(k)) {
            Tensor& gx = grad_of(k);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += g[r * cols + col_offset + j];
          }
          col_offset += c;
        }
      }
      return;
    }
    case Op::Stack: {
      const std::size_t width = y.dim(1);
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!wants(k)) continue;
        Tensor& gx = grad_of(k);
        for (std::size_t j = 0; j < width; ++j) gx[j] += g[k * width + j];
      }
      return;
    }
    case Op::Embedding: {
      Tensor& gt = grad_of(0);
      const std::size_t cols = y.size();
      for (std::size_t j = 0; j < cols; ++j) gt[a.start * cols + j] += g[j];
      return;
    }
    case Op::Slice: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < a.length; ++i) gx[a.start + i] += g[i];
      return;
    }
    case Op::Pick: {
      grad_of(0)[a.start] += g[0];
      return;
    }
    case Op::ScatterAdd: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < a.ids.size(); ++i) gx[i] += g[a.ids[i]];
      return;
    }
    case Op::Reshape: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      Tensor& gx = grad_of(0);
      const double scale = n.op == Op::Sum ? 1.0 : 1.0 / static_cast<double>(gx.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * scale;
      return;
    }
  }
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this || loss.id >= nodes_.size()) throw ContractViolation("loss does not belong to this tape");
  if (node_value(nodes_[loss.id]).size() != 1) throw ContractViolation("backward requires a scalar loss");

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor::scalar(1.0);
  for (std::int64_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || grads[id].empty()) continue;
    propagate(n, grads[id], grads);
  }

  Gradients out;
  for (const auto& [name, id] : bound_) {
    if (grads[id].empty()) {
      out.emplace(name, Tensor(nodes_[id].ref->shape()));
    } else {
      out.emplace(name, std::move(grads[id]));
    }
  }
  return out;
}

std::vector<Tensor> Tape::replay() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    if (n.op == Op::Constant || n.op == Op::Param) {
      values.push_back(node_value(n));
      continue;
    }
    std::vector<const Tensor*> in;
    for (std::uint32_t id : n.inputs) in.push_back(&values[id]);
    values.push_back(compute(n, in));
  }
  return values;
}

void backward(const Tape& tape, Var loss, ParamStore& store) {
  Gradients grads = tape.backward(loss);
  store.zero_grads();
  store.accumulate(grads);
}

namespace ad {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.tape || a.tape != b.tape) throw ContractViolation("operands live on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractViolation("variable is not bound to a tape");
  return *a.tape;
}

Var unary(Op op, Var a, OpAttr attr = {}) { return tape_of(a).record(op, {a.id}, std::move(attr)); }
Var binary(Op op, Var a, Var b) { return same_tape(a, b).record(op, {a.id, b.id}); }

Var variadic(Op op, std::span<const Var> parts, OpAttr attr) {
  if (parts.empty()) throw ContractViolation(std::string(op_name(op)) + ": no inputs");
  Tape& t = tape_of(parts[0]);
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (Var v : parts) {
    if (v.tape != &t) throw ContractViolation("operands live on different tapes");
    ids.push_back(v.id);
  }
  return t.record(op, std::move(ids), std::move(attr));
}

}  // namespace

Var matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }
Var transpose(Var a) { return unary(Op::Transpose, a); }
Var add(Var a, Var b) { return binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }

Var affine(Var a, double scale, double shift) {
  OpAttr attr;
  attr.scale = scale;
  attr.shift = shift;
  return unary(Op::Affine, a, std::move(attr));
}

Var add_scalar(Var a, Var s) { return binary(Op::AddScalar, a, s); }
Var scale_by(Var a, Var s) { return binary(Op::ScaleBy, a, s); }
Var add_row_bias(Var m, Var bias) { return binary(Op::AddRowBias, m, bias); }
Var tanh(Var a) { return unary(Op::Tanh, a); }
Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var log(Var a) { return unary(Op::Log, a); }

Var log_clamped(Var a, double floor) {
  OpAttr attr;
  attr.scale = floor;
  return unary(Op::LogClamped, a, std::move(attr));
}

Var softmax(Var a, std::size_t axis) {
  OpAttr attr;
  attr.axis = axis;
  return unary(Op::Softmax, a, std::move(attr));
}

Var masked_softmax(Var a, kernels::ExclusionMask excluded) {
  OpAttr attr;
  attr.mask = std::move(excluded);
  return unary(Op::MaskedSoftmax, a, std::move(attr));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  OpAttr attr;
  attr.axis = axis;
  return variadic(Op::Concat, parts, std::move(attr));
}

Var stack(std::span<const Var> rows) { return variadic(Op::Stack, rows, {}); }

Var embedding(Var table, std::size_t index) {
  OpAttr attr;
  attr.start = index;
  return unary(Op::Embedding, table, std::move(attr));
}

Var slice(Var v, std::size_t start, std::size_t length) {
  OpAttr attr;
  attr.start = start;
  attr.length = length;
  return unary(Op::Slice, v, std::move(attr));
}

Var pick(Var v, std::size_t index) {
  OpAttr attr;
  attr.start = index;
  return unary(Op::Pick, v, std::move(attr));
}

Var scatter_add(Var v, std::vector<std::size_t> ids, std::size_t size) {
  OpAttr attr;
  attr.ids = std::move(ids);
  attr.length = size;
  return unary(Op::ScatterAdd, v, std::move(attr));
}

Var reshape(Var a, Shape shape) {
  OpAttr attr;
  attr.shape = std::move(shape);
  return unary(Op::Reshape, a, std::move(attr));
}

Var sum(Var a) { return unary(Op::Sum, a); }
Var mean(Var a) { return unary(Op::Mean, a); }

}  // namespace ad

Var operator+(Var a, Var b) { return ad::add(a, b); }
Var operator-(Var a, Var b) { return ad::sub(a, b); }
Var operator*(Var a, Var b) { return ad::mul(a, b); }

}  // namespace csi
