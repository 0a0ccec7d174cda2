#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowad/autodiff.hpp"
#include "flowad/rng.hpp"

namespace flowad
{

/// Raised when a flow layer produces a non-finite value.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class Activation
{
  kIdentity,
  kTanh,
  kRelu,
};

/// Fully connected network; weights[k] is in x out, biases[k] is 1 x out.
struct Mlp
{
  std::vector<Parameter> weights;
  std::vector<Parameter> biases;
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kIdentity;

  std::size_t input_width() const { return weights.front().value.rows(); }
  std::size_t output_width() const { return weights.back().value.cols(); }

  std::vector<Parameter*> parameters()
  {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < weights.size(); ++l)
    {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }

  /// Hidden layers uniform(+-1/sqrt(fan_in)); the final layer starts at zero.
  static Mlp init(const std::string& name, std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng);
};

template <typename V>
V activate(const V& x, Activation a)
{
  switch (a)
  {
    case Activation::kTanh: return tanh(x);
    case Activation::kRelu: return relu(x);
    case Activation::kIdentity: break;
  }
  return x;
}

template <typename Ctx, typename V = typename Ctx::Value>
V mlp_forward(const Ctx& ctx, const Mlp& net, const V& input)
{
  V x = input;
  for (std::size_t k = 0; k < net.weights.size(); ++k)
  {
    x = add(matmul(x, ctx.param(net.weights[k])), ctx.param(net.biases[k]));
    x = activate(x, k + 1 == net.weights.size() ? net.output : net.hidden);
  }
  return x;
}

/// K masks over D dimensions; mask 0 keeps the first ceil(D/2) dimensions
/// and each later mask is the complement of the one before.
std::vector<std::vector<int>> mask_schedule(std::size_t D, std::size_t K);

/// Affine coupling. Mask-one dimensions pass through unchanged and, with the
/// conditioning input, feed s_net and t_net; the rest become y*exp(s) + t.
struct CouplingBlock
{
  std::vector<int> mask;
  Array keep;    // 1 x D, the mask as doubles
  Array change;  // 1 x D, 1 - mask
  std::size_t active_begin = 0;
  std::size_t active_end = 0;
  Mlp s_net;  // tanh hidden, tanh output
  Mlp t_net;  // relu hidden, linear output

  std::size_t width() const { return mask.size(); }
};

/// Invertible batch normalization with gamma = exp(log_gamma).
struct FlowBatchNorm
{
  Parameter log_gamma;  // 1 x D
  Parameter beta;       // 1 x D
  Array running_mean;   // 1 x D
  Array running_var;    // 1 x D
  double momentum = 0.99;
  double epsilon = 1e-5;
};

enum class FlowMode
{
  kTraining,
  kInference,
};

struct FlowOptions
{
  std::size_t coupling_blocks = 5;
  std::size_t st_hidden = 32;
  std::size_t st_layers = 2;  // hidden layers per network
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;
};

struct FlowModel
{
  std::size_t D = 0;
  std::size_t cond_width = 0;
  std::vector<CouplingBlock> blocks;
  std::vector<FlowBatchNorm> norms;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void validate() const;

  /// Random hidden layers, zero output layers and unit batch norms, so the
  /// fresh model is the identity map with zero log-determinant.
  static FlowModel init(std::size_t D, std::size_t cond_width, const FlowOptions& options, Rng& rng);
};

/// Batch moments seen by a training-mode pass, one entry per norm layer.
struct BatchMoments
{
  std::vector<Array> mean;
  std::vector<Array> var;
};

template <typename V>
struct FlowPass
{
  V z;
  V log_det;  // R x 1
};

namespace detail
{

inline void check_finite(const Array& a, const std::string& what, std::size_t block)
{
  if (!a.all_finite()) throw NumericalError("flow: non-finite " + what + " in block " + std::to_string(block));
}

template <typename Ctx, typename V>
V zero_column(const Ctx& ctx, const V& like)
{
  return ctx.constant(Array::zeros(value_of(like).rows(), 1));
}

}  // namespace detail

/// Scale and shift for `y`, already masked to the changed dimensions.
template <typename Ctx, typename V = typename Ctx::Value>
std::pair<V, V> coupling_st(const Ctx& ctx, const CouplingBlock& block, const V& y, const V& cond)
{
  const V parts[] = {slice_cols(y, block.active_begin, block.active_end), cond};
  const V input = concat_cols(std::span<const V>(parts));
  return {mask_mul(mlp_forward(ctx, block.s_net, input), block.change),
          mask_mul(mlp_forward(ctx, block.t_net, input), block.change)};
}

template <typename Ctx, typename V = typename Ctx::Value>
FlowPass<V> coupling_forward(const Ctx& ctx, const CouplingBlock& block, const V& y, const V& cond, std::size_t index = 0)
{
  auto [s, t] = coupling_st(ctx, block, y, cond);
  detail::check_finite(value_of(s), "scale", index);
  return {add(mul(y, exp(s)), t), row_sum(s)};
}

Array coupling_inverse(const CouplingBlock& block, const Array& y, const Array& cond);

/// Batch-norm forward. Training mode uses batch moments (recorded into
/// `moments` when given) unless the batch has a single row.
template <typename Ctx, typename V = typename Ctx::Value>
FlowPass<V> bn_forward(const Ctx& ctx, const FlowBatchNorm& bn, const V& y, FlowMode mode, BatchMoments* moments = nullptr)
{
  const std::size_t R = value_of(y).rows();
  V mu, var;
  if (mode == FlowMode::kTraining && R > 1)
  {
    mu = col_mean(y);
    const V centered = sub(y, mu);
    var = col_mean(mul(centered, centered));
    if (moments)
    {
      moments->mean.push_back(value_of(mu));
      moments->var.push_back(value_of(var));
    }
  }
  else
  {
    mu = ctx.constant(bn.running_mean);
    var = ctx.constant(bn.running_var);
  }
  const V log_gamma = ctx.param(bn.log_gamma);
  const V inv_std = pow_scalar(add_scalar(var, bn.epsilon), -0.5);
  const V out = add(mul(mul(sub(y, mu), inv_std), exp(log_gamma)), ctx.param(bn.beta));
  const V per_dim = sub(log_gamma, scale(log(add_scalar(var, bn.epsilon)), 0.5));
  return {out, add(detail::zero_column(ctx, y), sum(per_dim))};
}

/// Inverse using running statistics.
Array bn_inverse(const FlowBatchNorm& bn, const Array& y);

/// Pushes x (R x D) through every coupling and norm layer.
template <typename Ctx, typename V = typename Ctx::Value>
FlowPass<V> flow_forward(const Ctx& ctx, const FlowModel& model, const V& x, const V& cond, FlowMode mode,
                         BatchMoments* moments = nullptr)
{
  if (value_of(x).cols() != model.D || value_of(cond).cols() != model.cond_width || value_of(x).rows() != value_of(cond).rows())
  {
    throw ShapeError("flow: x " + to_string(value_of(x).shape()) + " and cond " + to_string(value_of(cond).shape()) +
                     " do not fit D=" + std::to_string(model.D) + ", cond=" + std::to_string(model.cond_width));
  }
  V y = x;
  V log_det = detail::zero_column(ctx, x);
  for (std::size_t k = 0; k < model.blocks.size(); ++k)
  {
    FlowPass<V> c = coupling_forward(ctx, model.blocks[k], y, cond, k);
    FlowPass<V> n = bn_forward(ctx, model.norms[k], c.z, mode, moments);
    detail::check_finite(value_of(n.z), "output", k);
    y = n.z;
    log_det = add(add(log_det, c.log_det), n.log_det);
  }
  return {y, log_det};
}

/// Standard-normal log density of each row of z (R x 1).
template <typename V>
V base_log_prob(const V& z)
{
  const double norm = -0.5 * static_cast<double>(value_of(z).cols()) * std::log(2.0 * std::numbers::pi);
  return add_scalar(scale(row_sum(mul(z, z)), -0.5), norm);
}

/// Standard-normal log density per row plus the accumulated log-determinant.
template <typename Ctx, typename V = typename Ctx::Value>
V log_prob(const Ctx& ctx, const FlowModel& model, const V& x, const V& cond, FlowMode mode = FlowMode::kInference,
           BatchMoments* moments = nullptr)
{
  const FlowPass<V> pass = flow_forward(ctx, model, x, cond, mode, moments);
  return add(base_log_prob(pass.z), pass.log_det);
}

/// Inverse of the inference-mode forward map.
Array flow_inverse(const FlowModel& model, const Array& z, const Array& cond);

/// Standard-normal draws for every row of `cond`, mapped back to data space.
Array flow_sample(const FlowModel& model, const Array& cond, Rng& rng);

/// Folds batch moments into the running statistics.
void update_running_stats(FlowModel& model, const BatchMoments& moments);

}  // namespace flowad
