#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flowad/autodiff.hpp"
#include "flowad/rng.hpp"

namespace flowad
{

/// One LSTM layer. Gate blocks are laid out as [input, forget, cell, output]
/// along the columns of wx, wh and b.
struct LstmLayerParams
{
  Parameter wx;  // input_width x 4H
  Parameter wh;  // H x 4H
  Parameter b;   // 1 x 4H

  std::size_t input_width() const { return wx.value.rows(); }
  std::size_t hidden_width() const { return wh.value.rows(); }
  void validate() const;

  /// Uniform(+-1/sqrt(fan_in)) weights; forget-gate bias 1.
  static LstmLayerParams init(const std::string& name, std::size_t input_width, std::size_t hidden, Rng& rng);
};

/// Stacked encoder and decoder with matching per-layer widths.
struct EncDecParams
{
  std::size_t data_width = 0;
  std::size_t time_width = 0;
  std::vector<LstmLayerParams> encoder;
  std::vector<LstmLayerParams> decoder;

  std::vector<std::size_t> hidden_widths() const;
  std::size_t output_width() const { return encoder.back().hidden_width(); }
  void validate() const;
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// Encoder layer 0 reads x (+) lambda; decoder layer 0 reads e (+) lambda.
  static EncDecParams init(std::size_t data_width, std::size_t time_width, std::span<const std::size_t> hidden, Rng& rng);
};

template <typename V>
struct LstmState
{
  V h;
  V c;
};

/// Standard gated update: c' = f*c + i*g, h' = o*tanh(c').
template <typename Ctx, typename V = typename Ctx::Value>
LstmState<V> lstm_step(const Ctx& ctx, const V& x, const LstmState<V>& state, const LstmLayerParams& p)
{
  const std::size_t H = p.hidden_width();
  if (value_of(x).cols() != p.input_width() || value_of(state.h).cols() != H || value_of(state.c).cols() != H)
  {
    throw ShapeError("lstm_step: input " + to_string(value_of(x).shape()) + ", state " +
                     to_string(value_of(state.h).shape()) + " do not fit layer " + std::to_string(p.input_width()) +
                     "->" + std::to_string(H));
  }
  const V z = add(add(matmul(x, ctx.param(p.wx)), matmul(state.h, ctx.param(p.wh))), ctx.param(p.b));
  const V i = sigmoid(slice_cols(z, 0, H));
  const V f = sigmoid(slice_cols(z, H, 2 * H));
  const V g = tanh(slice_cols(z, 2 * H, 3 * H));
  const V o = sigmoid(slice_cols(z, 3 * H, 4 * H));
  V c = add(mul(f, state.c), mul(i, g));
  V h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

template <typename V>
struct Encoding
{
  V e;
  std::vector<LstmState<V>> states;  // final state per layer
};

/// Runs a layer stack over one step; layer l > 0 reads layer l-1's output.
template <typename Ctx, typename V = typename Ctx::Value>
V stack_step(const Ctx& ctx, const V& input, std::vector<LstmState<V>>& states, const std::vector<LstmLayerParams>& layers)
{
  V x = input;
  for (std::size_t l = 0; l < layers.size(); ++l)
  {
    states[l] = lstm_step(ctx, x, states[l], layers[l]);
    x = states[l].h;
  }
  return x;
}

/// Encodes a batch of context windows. values[t] and times[t] are B x N and
/// B x time_width for context step t.
template <typename Ctx, typename V = typename Ctx::Value>
Encoding<V> encode(const Ctx& ctx, const EncDecParams& params, std::span<const Array> values, std::span<const Array> times)
{
  if (values.empty() || values.size() != times.size())
    throw std::invalid_argument("encode: need at least one context step with matching time features");
  const std::size_t B = values[0].rows();
  std::vector<LstmState<V>> states;
  for (const LstmLayerParams& layer : params.encoder)
  {
    states.push_back({ctx.constant(Array::zeros(B, layer.hidden_width())), ctx.constant(Array::zeros(B, layer.hidden_width()))});
  }
  V top = states.back().h;
  for (std::size_t t = 0; t < values.size(); ++t)
  {
    const Array parts[] = {values[t], times[t]};
    top = stack_step(ctx, ctx.constant(concat_cols(parts)), states, params.encoder);
  }
  return {top, std::move(states)};
}

/// Decodes pred_len = times.size() steps from the encoder's final states; the
/// input at each step is e (+) lambda. Returns the top-layer hidden state per
/// step (B x H each). Prediction-window observations are never read.
template <typename Ctx, typename V = typename Ctx::Value>
std::vector<V> decode(const Ctx& ctx, const EncDecParams& params, const Encoding<V>& encoding, std::span<const Array> times)
{
  if (times.empty()) throw std::invalid_argument("decode: pred_len must be at least 1");
  std::vector<LstmState<V>> states = encoding.states;
  std::vector<V> out;
  out.reserve(times.size());
  for (const Array& lambda : times)
  {
    const V parts[] = {encoding.e, ctx.constant(lambda)};
    out.push_back(stack_step(ctx, concat_cols(std::span<const V>(parts)), states, params.decoder));
  }
  return out;
}

}  // namespace flowad
