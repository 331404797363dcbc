#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "csi/numerics/kernels.hpp"
#include "csi/numerics/param_store.hpp"
#include "csi/numerics/tensor.hpp"

namespace csi {

class Tape;

enum class Op : std::uint8_t {
  Constant,
  Param,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Affine,
  AddScalar,
  ScaleBy,
  AddRowBias,
  Tanh,
  Sigmoid,
  Log,
  LogClamped,
  Softmax,
  MaskedSoftmax,
  Concat,
  Stack,
  Embedding,
  Slice,
  Pick,
  ScatterAdd,
  Reshape,
  Sum,
  Mean,
};

const char* op_name(Op op) noexcept;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Op-specific attributes saved alongside a node.
struct OpAttr {
  std::size_t axis = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  double scale = 1.0;
  double shift = 0.0;
  std::vector<std::size_t> ids;
  kernels::ExclusionMask mask;
  Shape shape;
};

// Records a computation in topological order so it can be differentiated.
// Parameter leaves reference the ParamStore they were bound from; that store
// must outlive the tape and stay unmodified while the tape is in use.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binds a parameter; repeated binds of the same name return the same node.
  Var param(const ParamStore& store, const std::string& name);

  Var record(Op op, std::vector<std::uint32_t> inputs, OpAttr attr = {});

  const Tensor& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(std::uint32_t id) const { return nodes_.at(id).op; }
  const std::vector<std::uint32_t>& inputs(std::uint32_t id) const { return nodes_.at(id).inputs; }

  // Reverse sweep from a scalar loss. Returns a gradient for every parameter
  // bound on this tape (zero when the loss does not depend on it).
  Gradients backward(Var loss) const;

  // Recomputes every derived node from its recorded inputs.
  std::vector<Tensor> replay() const;

 private:
  struct Node {
    Op op = Op::Constant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    const Tensor* ref = nullptr;
    std::string param;
    OpAttr attr;
    bool needs_grad = false;
  };

  const Tensor& node_value(const Node& n) const { return n.ref ? *n.ref : n.value; }
  Tensor compute(const Node& n, const std::vector<const Tensor*>& in) const;
  void propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> bound_;
};

// Writes the gradients of `loss` into `store`: every parameter's gradient is
// reset, then filled for those reachable from the loss.
void backward(const Tape& tape, Var loss, ParamStore& store);

// Differentiable operations on tape variables. Both operands must live on the
// same tape.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var affine(Var a, double scale, double shift);
Var add_scalar(Var a, Var s);
Var scale_by(Var a, Var s);
Var add_row_bias(Var m, Var bias);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var log_clamped(Var a, double floor);
Var softmax(Var a, std::size_t axis = 0);
Var masked_softmax(Var a, kernels::ExclusionMask excluded);
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var stack(std::span<const Var> rows);
Var embedding(Var table, std::size_t index);
Var slice(Var v, std::size_t start, std::size_t length);
Var pick(Var v, std::size_t index);
Var scatter_add(Var v, std::vector<std::size_t> ids, std::size_t size);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var mean(Var a);

}  // namespace ad

// Elementwise arithmetic on tape variables (found by argument lookup).
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);

}  // namespace csi
