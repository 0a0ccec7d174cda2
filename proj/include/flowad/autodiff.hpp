#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowad/array.hpp"

namespace flowad
{

/// A trainable array with its accumulated gradient.
struct Parameter
{
  std::string name;
  Array value;
  /// Gradient buffer; written by Tape::backward even through const access.
  mutable Array grad;

  Parameter() = default;
  Parameter(std::string n, Array v) : name(std::move(n)), value(std::move(v)), grad(Array::zeros_like(value)) {}

  void zero_grad() const { grad = Array::zeros_like(value); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var
{
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Array& value() const;
  const Array& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// the reverse of insertion order is a valid topological order.
class Tape
{
public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Array value);
  /// Leaf bound to `param`; backward() adds into param.grad.
  Var leaf(const Parameter& param);
  /// Leaf without a bound parameter, useful for differentiating w.r.t. inputs.
  Var variable(Array value);

  Var record(Array value, std::span<const Var> parents, Backprop backprop);

  /// Reverse accumulation from a scalar root.
  void backward(Var root);

  const Array& value(std::size_t id) const { return nodes_[id].value; }
  const Array& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Array& g);
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node
  {
    Array value;
    Array grad;
    Backprop backprop;
    const Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Differentiable counterparts of the eager array math. Broadcasting follows
// the same rules: the second operand may be a row, column or scalar.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var pow_scalar(Var a, double p);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var col_mean(Var a);
/// Elementwise product with a fixed (non-differentiable) mask.
Var mask_mul(Var a, const Array& mask);
Array mask_mul(const Array& a, const Array& mask);

/// Binds parameters as plain values; model code templated on a context runs
/// eagerly with this one.
struct EagerContext
{
  using Value = Array;
  const Array& param(const Parameter& p) const { return p.value; }
  Array constant(Array a) const { return a; }
};

/// Binds parameters as tape leaves so the evaluation can be differentiated.
struct TapeContext
{
  using Value = Var;
  Tape* tape;
  Var param(const Parameter& p) const { return tape->leaf(p); }
  Var constant(Array a) const { return tape->constant(std::move(a)); }
};

inline const Array& value_of(const Array& a) { return a; }
inline const Array& value_of(const Var& v) { return v.value(); }

}  // namespace flowad
