#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowad/dataio.hpp"
#include "flowad/flow.hpp"
#include "flowad/seqenc.hpp"

namespace flowad
{

struct ModelConfig
{
  std::size_t data_width = 0;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t st_hidden = 32;
  std::size_t st_layers = 2;
  std::size_t coupling_blocks = 5;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;
  std::size_t context_len = 72;
  std::size_t pred_len = 12;

  void validate() const;
};

/// Encoder-decoder whose per-step outputs condition a RealNVP flow over one
/// timestep of the prediction window.
struct CondFlowModel
{
  ModelConfig config;
  std::vector<std::string> feature_ids;
  Standardizer standardizer;
  EncDecParams encdec;
  FlowModel flow;

  std::size_t cond_width() const { return encdec.output_width() + TimeFeatures::kWidth; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  static CondFlowModel init(const ModelConfig& config, std::uint64_t seed);
};

/// Windows packed step-major: prediction rows are ordered p * B + b.
struct WindowBatch
{
  std::vector<Array> context;          // context_len arrays of B x N
  std::vector<Array> context_time;     // context_len arrays of B x 3
  std::vector<Array> prediction_time;  // pred_len arrays of B x 3
  Array prediction_time_rows;          // (pred_len * B) x 3
  Array targets;                       // (pred_len * B) x N

  std::size_t size() const { return context.empty() ? 0 : context[0].rows(); }
  std::size_t steps() const { return prediction_time.size(); }
};

WindowBatch make_batch(std::span<const SlidingWindow> windows, std::span<const std::size_t> indices);
WindowBatch make_batch(std::span<const SlidingWindow> windows);

/// log p(x^t | h^t, lambda^t) for every prediction row, (pred_len * B) x 1.
template <typename Ctx, typename V = typename Ctx::Value>
V window_log_prob(const Ctx& ctx, const CondFlowModel& model, const WindowBatch& batch, FlowMode mode,
                  BatchMoments* moments = nullptr)
{
  const Encoding<V> enc = encode(ctx, model.encdec, batch.context, batch.context_time);
  const std::vector<V> h = decode(ctx, model.encdec, enc, batch.prediction_time);
  const V parts[] = {concat_rows(std::span<const V>(h)), ctx.constant(batch.prediction_time_rows)};
  const V cond = concat_cols(std::span<const V>(parts));
  return log_prob(ctx, model.flow, ctx.constant(batch.targets), cond, mode, moments);
}

/// Per-window means of a (pred_len * B) x 1 column laid out as in WindowBatch.
std::vector<double> window_means(const Array& rows, std::size_t batch_size);

}  // namespace flowad
