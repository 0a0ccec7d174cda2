#include "flowad/model.hpp"

#include <numeric>
#include <stdexcept>

namespace flowad
{

void ModelConfig::validate() const
{
  if (data_width < 2) throw std::invalid_argument("model: data_width must be at least 2, got " + std::to_string(data_width));
  if (hidden.empty()) throw std::invalid_argument("model: hidden needs at least one layer width");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("model: hidden widths must be positive");
  if (st_hidden == 0) throw std::invalid_argument("model: st_hidden must be positive");
  if (coupling_blocks == 0) throw std::invalid_argument("model: coupling_blocks must be at least 1");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw std::invalid_argument("model: bn_momentum must lie in [0, 1)");
  if (!(bn_epsilon >= 0.0)) throw std::invalid_argument("model: bn_epsilon must be nonnegative");
  if (context_len == 0 || pred_len == 0) throw std::invalid_argument("model: context_len and pred_len must be positive");
}

std::vector<Parameter*> CondFlowModel::parameters()
{
  std::vector<Parameter*> out = encdec.parameters();
  for (Parameter* p : flow.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> CondFlowModel::parameters() const
{
  std::vector<const Parameter*> out = encdec.parameters();
  for (const Parameter* p : flow.parameters()) out.push_back(p);
  return out;
}

CondFlowModel CondFlowModel::init(const ModelConfig& config, std::uint64_t seed)
{
  config.validate();
  Rng rng(seed);
  CondFlowModel m;
  m.config = config;
  for (std::size_t i = 0; i < config.data_width; ++i) m.feature_ids.push_back("x" + std::to_string(i));
  m.standardizer.mean.assign(config.data_width, 0.0);
  m.standardizer.stddev.assign(config.data_width, 1.0);
  m.encdec = EncDecParams::init(config.data_width, TimeFeatures::kWidth, config.hidden, rng);
  FlowOptions fo;
  fo.coupling_blocks = config.coupling_blocks;
  fo.st_hidden = config.st_hidden;
  fo.st_layers = config.st_layers;
  fo.bn_momentum = config.bn_momentum;
  fo.bn_epsilon = config.bn_epsilon;
  m.flow = FlowModel::init(config.data_width, m.cond_width(), fo, rng);
  return m;
}

WindowBatch make_batch(std::span<const SlidingWindow> windows, std::span<const std::size_t> indices)
{
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const SlidingWindow& first = windows[indices[0]];
  const std::size_t B = indices.size(), C = first.context_length(), P = first.prediction_length();
  const std::size_t N = first.context.cols(), W = first.context_time.cols();
  WindowBatch b;
  b.context.assign(C, Array::zeros(B, N));
  b.context_time.assign(C, Array::zeros(B, W));
  b.prediction_time.assign(P, Array::zeros(B, W));
  b.prediction_time_rows = Array::zeros(P * B, W);
  b.targets = Array::zeros(P * B, N);
  for (std::size_t k = 0; k < B; ++k)
  {
    const SlidingWindow& w = windows[indices[k]];
    if (w.context_length() != C || w.prediction_length() != P || w.context.cols() != N)
      throw ShapeError("make_batch: windows differ in shape");
    for (std::size_t t = 0; t < C; ++t)
    {
      for (std::size_t j = 0; j < N; ++j) b.context[t].at(k, j) = w.context.at(t, j);
      for (std::size_t j = 0; j < W; ++j) b.context_time[t].at(k, j) = w.context_time.at(t, j);
    }
    for (std::size_t p = 0; p < P; ++p)
    {
      for (std::size_t j = 0; j < W; ++j)
      {
        b.prediction_time[p].at(k, j) = w.prediction_time.at(p, j);
        b.prediction_time_rows.at(p * B + k, j) = w.prediction_time.at(p, j);
      }
      for (std::size_t j = 0; j < N; ++j) b.targets.at(p * B + k, j) = w.prediction.at(p, j);
    }
  }
  return b;
}

WindowBatch make_batch(std::span<const SlidingWindow> windows)
{
  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(windows, all);
}

std::vector<double> window_means(const Array& rows, std::size_t batch_size)
{
  if (batch_size == 0 || rows.rows() % batch_size != 0) throw ShapeError("window_means: rows do not split into windows");
  const std::size_t P = rows.rows() / batch_size;
  std::vector<double> out(batch_size, 0.0);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t b = 0; b < batch_size; ++b) out[b] += rows[p * batch_size + b];
  for (double& v : out) v /= static_cast<double>(P);
  return out;
}

}  // namespace flowad
