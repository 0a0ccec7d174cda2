#include "flowad/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace flowad
{

const Array& Var::value() const { return tape->value(id); }
const Array& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Array value)
{
  nodes_.push_back(Node{std::move(value), Array(), nullptr, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(const Parameter& param)
{
  nodes_.push_back(Node{param.value, Array(), nullptr, &param, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Array value)
{
  nodes_.push_back(Node{std::move(value), Array(), nullptr, nullptr, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Array value, std::span<const Var> parents, Backprop backprop)
{
  bool needs = false;
  for (const Var& p : parents)
  {
    if (p.tape != this) throw std::invalid_argument("tape: operand recorded on a different tape");
    needs = needs || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Array(), needs ? std::move(backprop) : nullptr, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Array& g)
{
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0 && n.value.size() != 0)
  {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var root)
{
  if (root.tape != this) throw std::invalid_argument("backward: root belongs to a different tape");
  if (nodes_[root.id].value.size() != 1)
  {
    throw ShapeError("backward: root must be scalar, got " + to_string(nodes_[root.id].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Array();
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad = Array(nodes_[root.id].value.shape(), 1.0);
  for (std::size_t i = root.id + 1; i-- > 0;)
  {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, i);
    if (n.param != nullptr)
    {
      Array& pg = n.param->grad;
      if (!pg.same_shape(n.grad)) pg = Array::zeros_like(n.param->value);
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

namespace
{

std::array<Var, 1> one(Var a) { return {a}; }
std::array<Var, 2> two(Var a, Var b) { return {a, b}; }

}  // namespace

Var matmul(Var a, Var b)
{
  return a.tape->record(matmul(a.value(), b.value()), two(a, b), [a, b](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    if (t.requires_grad(a.id)) t.accumulate(a.id, matmul_nt(g, b.value()));
    if (t.requires_grad(b.id)) t.accumulate(b.id, matmul_tn(a.value(), g));
  });
}

Var add(Var a, Var b)
{
  return a.tape->record(add(a.value(), b.value()), two(a, b), [a, b](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    t.accumulate(a.id, g);
    if (t.requires_grad(b.id)) t.accumulate(b.id, reduce_to(g, b.value().shape()));
  });
}

Var sub(Var a, Var b)
{
  return a.tape->record(sub(a.value(), b.value()), two(a, b), [a, b](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    t.accumulate(a.id, g);
    if (t.requires_grad(b.id)) t.accumulate(b.id, scale(reduce_to(g, b.value().shape()), -1.0));
  });
}

Var mul(Var a, Var b)
{
  return a.tape->record(mul(a.value(), b.value()), two(a, b), [a, b](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    if (t.requires_grad(a.id)) t.accumulate(a.id, mul(g, b.value()));
    if (t.requires_grad(b.id)) t.accumulate(b.id, reduce_to(mul(g, a.value()), b.value().shape()));
  });
}

Var scale(Var a, double c)
{
  return a.tape->record(scale(a.value(), c), one(a),
                        [a, c](Tape& t, std::size_t self) { t.accumulate(a.id, scale(t.grad(self), c)); });
}

Var add_scalar(Var a, double c)
{
  return a.tape->record(add_scalar(a.value(), c), one(a),
                        [a](Tape& t, std::size_t self) { t.accumulate(a.id, t.grad(self)); });
}

Var pow_scalar(Var a, double p)
{
  return a.tape->record(pow_scalar(a.value(), p), one(a), [a, p](Tape& t, std::size_t self) {
    Array d = scale(pow_scalar(a.value(), p - 1.0), p);
    t.accumulate(a.id, mul(t.grad(self), d));
  });
}

Var tanh(Var a)
{
  return a.tape->record(tanh(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const Array& y = t.value(self);
    Array g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
    t.accumulate(a.id, g);
  });
}

Var sigmoid(Var a)
{
  return a.tape->record(sigmoid(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const Array& y = t.value(self);
    Array g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
    t.accumulate(a.id, g);
  });
}

Var softplus(Var a)
{
  return a.tape->record(softplus(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const Array s = sigmoid(t.value(a.id));
    Array g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i];
    t.accumulate(a.id, g);
  });
}

Var relu(Var a)
{
  return a.tape->record(relu(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const Array& x = a.value();
    Array g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(x[i] > 0.0)) g[i] = 0.0;
    t.accumulate(a.id, g);
  });
}

Var exp(Var a)
{
  return a.tape->record(exp(a.value()), one(a),
                        [a](Tape& t, std::size_t self) { t.accumulate(a.id, mul(t.grad(self), t.value(self))); });
}

Var log(Var a)
{
  return a.tape->record(log(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const Array& x = a.value();
    Array g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= x[i];
    t.accumulate(a.id, g);
  });
}

Var concat_cols(std::span<const Var> parts)
{
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  std::vector<Array> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape->record(concat_cols(values), parts, [saved](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    std::size_t begin = 0;
    for (const Var& p : saved)
    {
      const std::size_t w = p.value().cols();
      if (t.requires_grad(p.id))
      {
        Array part = slice_cols(g, begin, begin + w);
        t.accumulate(p.id, Array(p.value().shape(), std::move(part.data())));
      }
      begin += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts)
{
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  std::vector<Array> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape->record(concat_rows(values), parts, [saved](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    std::size_t begin = 0;
    for (const Var& p : saved)
    {
      const std::size_t h = p.value().rows();
      if (t.requires_grad(p.id))
      {
        Array part = slice_rows(g, begin, begin + h);
        t.accumulate(p.id, Array(p.value().shape(), std::move(part.data())));
      }
      begin += h;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end)
{
  return a.tape->record(slice_cols(a.value(), begin, end), one(a), [a, begin, end](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    Array full = Array::zeros_like(a.value());
    const std::size_t cols = full.cols();
    const std::size_t w = end - begin;
    for (std::size_t r = 0; r < full.rows(); ++r)
      for (std::size_t c = 0; c < w; ++c) full[r * cols + begin + c] = g[r * w + c];
    t.accumulate(a.id, full);
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end)
{
  return a.tape->record(slice_rows(a.value(), begin, end), one(a), [a, begin](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    Array full = Array::zeros_like(a.value());
    std::copy(g.data().begin(), g.data().end(),
              full.data().begin() + static_cast<std::ptrdiff_t>(begin * full.cols()));
    t.accumulate(a.id, full);
  });
}

Var sum(Var a)
{
  return a.tape->record(sum(a.value()), one(a), [a](Tape& t, std::size_t self) {
    t.accumulate(a.id, Array(a.value().shape(), t.grad(self).item()));
  });
}

Var mean(Var a)
{
  return a.tape->record(mean(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const double n = static_cast<double>(a.value().size());
    t.accumulate(a.id, Array(a.value().shape(), t.grad(self).item() / n));
  });
}

Var row_sum(Var a)
{
  return a.tape->record(row_sum(a.value()), one(a), [a](Tape& t, std::size_t self) {
    t.accumulate(a.id, broadcast_like(t.grad(self), a.value()));
  });
}

Var col_mean(Var a)
{
  return a.tape->record(col_mean(a.value()), one(a), [a](Tape& t, std::size_t self) {
    const double n = static_cast<double>(a.value().rows());
    t.accumulate(a.id, scale(broadcast_like(t.grad(self), a.value()), 1.0 / n));
  });
}

Array mask_mul(const Array& a, const Array& mask) { return mul(a, mask); }

Var mask_mul(Var a, const Array& mask)
{
  return a.tape->record(mul(a.value(), mask), one(a), [a, mask](Tape& t, std::size_t self) {
    t.accumulate(a.id, mul(t.grad(self), mask));
  });
}

}  // namespace flowad
