#include "flowad/seqenc.hpp"

#include <cmath>
#include <stdexcept>

#include "flowad/optim.hpp"

namespace flowad
{

void LstmLayerParams::validate() const
{
  const std::size_t H = hidden_width();
  if (H == 0 || wx.value.cols() != 4 * H || wh.value.cols() != 4 * H || b.value.rows() != 1 || b.value.cols() != 4 * H)
  {
    throw ShapeError("lstm layer: inconsistent shapes wx " + to_string(wx.value.shape()) + ", wh " +
                     to_string(wh.value.shape()) + ", b " + to_string(b.value.shape()));
  }
}

LstmLayerParams LstmLayerParams::init(const std::string& name, std::size_t input_width, std::size_t hidden, Rng& rng)
{
  if (input_width == 0 || hidden == 0) throw std::invalid_argument("lstm layer: widths must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_width + hidden));
  LstmLayerParams p{{name + ".wx", uniform_init(input_width, 4 * hidden, bound, rng)},
                    {name + ".wh", uniform_init(hidden, 4 * hidden, bound, rng)},
                    {name + ".b", Array::zeros(1, 4 * hidden)}};
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b.value.at(0, j) = 1.0;
  return p;
}

std::vector<std::size_t> EncDecParams::hidden_widths() const
{
  std::vector<std::size_t> out;
  for (const auto& layer : encoder) out.push_back(layer.hidden_width());
  return out;
}

void EncDecParams::validate() const
{
  if (encoder.empty() || encoder.size() != decoder.size())
    throw std::invalid_argument("encoder/decoder: layer counts must be equal and positive");
  for (std::size_t l = 0; l < encoder.size(); ++l)
  {
    encoder[l].validate();
    decoder[l].validate();
    if (encoder[l].hidden_width() != decoder[l].hidden_width())
      throw std::invalid_argument("encoder/decoder: hidden widths differ at layer " + std::to_string(l));
    const std::size_t enc_in = l == 0 ? data_width + time_width : encoder[l - 1].hidden_width();
    const std::size_t dec_in = l == 0 ? output_width() + time_width : decoder[l - 1].hidden_width();
    if (encoder[l].input_width() != enc_in || decoder[l].input_width() != dec_in)
      throw std::invalid_argument("encoder/decoder: input width mismatch at layer " + std::to_string(l));
  }
}

std::vector<Parameter*> EncDecParams::parameters()
{
  std::vector<Parameter*> out;
  for (auto* stack : {&encoder, &decoder})
    for (LstmLayerParams& l : *stack)
      for (Parameter* p : {&l.wx, &l.wh, &l.b}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> EncDecParams::parameters() const
{
  std::vector<const Parameter*> out;
  for (auto* stack : {&encoder, &decoder})
    for (const LstmLayerParams& l : *stack)
      for (const Parameter* p : {&l.wx, &l.wh, &l.b}) out.push_back(p);
  return out;
}

EncDecParams EncDecParams::init(std::size_t data_width, std::size_t time_width, std::span<const std::size_t> hidden, Rng& rng)
{
  if (hidden.empty()) throw std::invalid_argument("encoder/decoder: need at least one layer");
  EncDecParams p;
  p.data_width = data_width;
  p.time_width = time_width;
  for (std::size_t l = 0; l < hidden.size(); ++l)
  {
    const std::size_t in = l == 0 ? data_width + time_width : hidden[l - 1];
    p.encoder.push_back(LstmLayerParams::init("encoder." + std::to_string(l), in, hidden[l], rng));
  }
  for (std::size_t l = 0; l < hidden.size(); ++l)
  {
    const std::size_t in = l == 0 ? hidden.back() + time_width : hidden[l - 1];
    p.decoder.push_back(LstmLayerParams::init("decoder." + std::to_string(l), in, hidden[l], rng));
  }
  p.validate();
  return p;
}

}  // namespace flowad
