#include "flowad/flow.hpp"

#include <algorithm>

#include "flowad/optim.hpp"

namespace flowad
{

Mlp Mlp::init(const std::string& name, std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng)
{
  if (widths.size() < 2) throw std::invalid_argument("mlp: need input and output widths");
  Mlp net;
  net.hidden = hidden;
  net.output = output;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k)
  {
    const bool last = k + 2 == widths.size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[k]));
    net.weights.emplace_back(name + ".w" + std::to_string(k),
                             last ? Array::zeros(widths[k], widths[k + 1]) : uniform_init(widths[k], widths[k + 1], bound, rng));
    net.biases.emplace_back(name + ".b" + std::to_string(k), Array::zeros(1, widths[k + 1]));
  }
  return net;
}

std::vector<std::vector<int>> mask_schedule(std::size_t D, std::size_t K)
{
  if (D < 2) throw std::invalid_argument("mask_schedule: coupling needs D >= 2, got " + std::to_string(D));
  std::vector<std::vector<int>> masks;
  std::vector<int> m(D, 0);
  for (std::size_t j = 0; j < (D + 1) / 2; ++j) m[j] = 1;
  for (std::size_t k = 0; k < K; ++k)
  {
    masks.push_back(m);
    for (int& v : m) v = 1 - v;
  }
  return masks;
}

Array coupling_inverse(const CouplingBlock& block, const Array& y, const Array& cond)
{
  // Mask-one columns are unchanged by the forward map, so s and t can be
  // recomputed from y directly.
  auto [s, t] = coupling_st(EagerContext{}, block, y, cond);
  return mul(sub(y, t), exp(scale(s, -1.0)));
}

Array bn_inverse(const FlowBatchNorm& bn, const Array& y)
{
  const Array std_dev = pow_scalar(add_scalar(bn.running_var, bn.epsilon), 0.5);
  return add(mul(mul(sub(y, bn.beta.value), exp(scale(bn.log_gamma.value, -1.0))), std_dev), bn.running_mean);
}

std::vector<Parameter*> FlowModel::parameters()
{
  std::vector<Parameter*> out;
  for (std::size_t k = 0; k < blocks.size(); ++k)
  {
    for (Mlp* net : {&blocks[k].s_net, &blocks[k].t_net})
    {
      for (std::size_t l = 0; l < net->weights.size(); ++l)
      {
        out.push_back(&net->weights[l]);
        out.push_back(&net->biases[l]);
      }
    }
    out.push_back(&norms[k].log_gamma);
    out.push_back(&norms[k].beta);
  }
  return out;
}

std::vector<const Parameter*> FlowModel::parameters() const
{
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<FlowModel*>(this)->parameters()) out.push_back(p);
  return out;
}

void FlowModel::validate() const
{
  if (blocks.empty() || blocks.size() != norms.size()) throw std::invalid_argument("flow: need K >= 1 blocks, each with a norm");
  for (std::size_t k = 0; k < blocks.size(); ++k)
  {
    const CouplingBlock& b = blocks[k];
    if (b.width() != D) throw std::invalid_argument("flow: mask width mismatch in block " + std::to_string(k));
    if (k > 0)
      for (std::size_t j = 0; j < D; ++j)
        if (b.mask[j] == blocks[k - 1].mask[j]) throw std::invalid_argument("flow: masks must alternate");
    const std::size_t in = b.active_end - b.active_begin + cond_width;
    for (const Mlp* net : {&b.s_net, &b.t_net})
      if (net->input_width() != in || net->output_width() != D)
        throw std::invalid_argument("flow: network shape mismatch in block " + std::to_string(k));
    const FlowBatchNorm& n = norms[k];
    if (n.log_gamma.value.cols() != D || n.running_var.cols() != D)
      throw std::invalid_argument("flow: norm width mismatch in block " + std::to_string(k));
    for (double v : n.running_var.data())
      if (!(v > 0.0)) throw std::invalid_argument("flow: running variance must be positive");
  }
}

FlowModel FlowModel::init(std::size_t D, std::size_t cond_width, const FlowOptions& options, Rng& rng)
{
  if (options.coupling_blocks == 0) throw std::invalid_argument("flow: K must be at least 1");
  FlowModel model;
  model.D = D;
  model.cond_width = cond_width;
  const auto masks = mask_schedule(D, options.coupling_blocks);
  for (std::size_t k = 0; k < masks.size(); ++k)
  {
    CouplingBlock b;
    b.mask = masks[k];
    b.keep = Array::zeros(1, D);
    b.change = Array::zeros(1, D);
    for (std::size_t j = 0; j < D; ++j)
    {
      b.keep[j] = b.mask[j];
      b.change[j] = 1 - b.mask[j];
    }
    const auto first = std::find(b.mask.begin(), b.mask.end(), 1);
    b.active_begin = static_cast<std::size_t>(first - b.mask.begin());
    b.active_end = static_cast<std::size_t>(std::find(first, b.mask.end(), 0) - b.mask.begin());
    std::vector<std::size_t> widths{b.active_end - b.active_begin + cond_width};
    for (std::size_t l = 0; l < options.st_layers; ++l) widths.push_back(options.st_hidden);
    widths.push_back(D);
    const std::string name = "flow." + std::to_string(k);
    b.s_net = Mlp::init(name + ".s", widths, Activation::kTanh, Activation::kTanh, rng);
    b.t_net = Mlp::init(name + ".t", widths, Activation::kRelu, Activation::kIdentity, rng);
    model.blocks.push_back(std::move(b));

    FlowBatchNorm n{{name + ".bn.log_gamma", Array::zeros(1, D)},
                    {name + ".bn.beta", Array::zeros(1, D)},
                    Array::zeros(1, D),
                    Array({1, D}, 1.0 - options.bn_epsilon),
                    options.bn_momentum,
                    options.bn_epsilon};
    model.norms.push_back(std::move(n));
  }
  model.validate();
  return model;
}

Array flow_inverse(const FlowModel& model, const Array& z, const Array& cond)
{
  if (z.cols() != model.D || cond.cols() != model.cond_width || z.rows() != cond.rows())
    throw ShapeError("flow_inverse: z " + to_string(z.shape()) + " and cond " + to_string(cond.shape()) + " do not fit");
  Array y = z;
  for (std::size_t k = model.blocks.size(); k-- > 0;)
  {
    y = bn_inverse(model.norms[k], y);
    y = coupling_inverse(model.blocks[k], y, cond);
    detail::check_finite(y, "inverse output", k);
  }
  return y;
}

Array flow_sample(const FlowModel& model, const Array& cond, Rng& rng)
{
  Array z = Array::zeros(cond.rows(), model.D);
  for (double& v : z.data()) v = rng.normal();
  return flow_inverse(model, z, cond);
}

void update_running_stats(FlowModel& model, const BatchMoments& moments)
{
  if (moments.mean.empty()) return;
  if (moments.mean.size() != model.norms.size() || moments.var.size() != model.norms.size())
    throw std::invalid_argument("update_running_stats: expected one moment pair per norm layer");
  for (std::size_t k = 0; k < model.norms.size(); ++k)
  {
    FlowBatchNorm& n = model.norms[k];
    for (std::size_t j = 0; j < model.D; ++j)
    {
      n.running_mean[j] = n.momentum * n.running_mean[j] + (1.0 - n.momentum) * moments.mean[k][j];
      n.running_var[j] = n.momentum * n.running_var[j] + (1.0 - n.momentum) * moments.var[k][j];
    }
  }
}

}  // namespace flowad
