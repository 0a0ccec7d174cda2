#include <gtest/gtest.h>

#include <cmath>

#include "flowad/seqenc.hpp"
#include "support/oracles.hpp"

namespace flowad
{
namespace
{

using testing::random_array;
using testing::worst_parameter_gradient_error;

std::vector<Array> random_steps(std::size_t steps, std::size_t rows, std::size_t cols, Rng& rng)
{
  std::vector<Array> out;
  for (std::size_t t = 0; t < steps; ++t) out.push_back(random_array(rows, cols, rng));
  return out;
}

TEST(LstmStepTest, ZeroWeightsGiveZeroHidden)
{
  LstmLayerParams p{{"wx", Array::zeros(3, 8)}, {"wh", Array::zeros(2, 8)}, {"b", Array::zeros(1, 8)}};
  const LstmState<Array> s{Array::zeros(1, 2), Array::zeros(1, 2)};
  const auto next = lstm_step(EagerContext{}, Array({1, 3}, {1.0, -2.0, 3.0}), s, p);
  for (double v : next.h.data()) EXPECT_EQ(v, 0.0);
  for (double v : next.c.data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmStepTest, MatchesHandComputedGates)
{
  // One unit, input width 1: z = x*wx + h*wh + b per gate.
  LstmLayerParams p{{"wx", Array({1, 4}, {0.5, -0.3, 0.8, 0.1})},
                    {"wh", Array({1, 4}, {0.2, 0.4, -0.6, 0.7})},
                    {"b", Array({1, 4}, {0.0, 1.0, 0.1, -0.2})}};
  const double x = 0.9, h = -0.4, c = 0.3;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(0.5 * x + 0.2 * h), f = sig(-0.3 * x + 0.4 * h + 1.0);
  const double g = std::tanh(0.8 * x - 0.6 * h + 0.1), o = sig(0.1 * x + 0.7 * h - 0.2);
  const double c_next = f * c + i * g;
  const auto next = lstm_step(EagerContext{}, Array::scalar(x), LstmState<Array>{Array::scalar(h), Array::scalar(c)}, p);
  EXPECT_NEAR(next.c.item(), c_next, 1e-15);
  EXPECT_NEAR(next.h.item(), o * std::tanh(c_next), 1e-15);
}

TEST(LstmStepTest, HiddenStaysInsideUnitInterval)
{
  Rng rng(3);
  LstmLayerParams p = LstmLayerParams::init("l", 4, 6, rng);
  for (double& v : p.wx.value.data()) v *= 50.0;
  LstmState<Array> s{Array::zeros(5, 6), Array::zeros(5, 6)};
  for (int t = 0; t < 20; ++t)
  {
    s = lstm_step(EagerContext{}, random_array(5, 4, rng, -10, 10), s, p);
    for (double v : s.h.data())
    {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(LstmStepTest, InitLayoutAndForgetBias)
{
  Rng rng(1);
  const LstmLayerParams p = LstmLayerParams::init("l", 3, 4, rng);
  EXPECT_EQ(p.wx.value.shape(), (Shape{3, 16}));
  EXPECT_EQ(p.wh.value.shape(), (Shape{4, 16}));
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(p.b.value.at(0, j), j >= 4 && j < 8 ? 1.0 : 0.0);
  const double bound = 1.0 / std::sqrt(7.0);
  for (double v : p.wx.value.data()) EXPECT_LE(std::abs(v), bound);
  EXPECT_THROW(lstm_step(EagerContext{}, Array::zeros(1, 2), LstmState<Array>{Array::zeros(1, 4), Array::zeros(1, 4)}, p),
               ShapeError);
}

TEST(LstmStepTest, ThreeChainedStepsMatchFiniteDifferences)
{
  Rng rng(7);
  LstmLayerParams p = LstmLayerParams::init("l", 3, 4, rng);
  std::vector<Array> xs = random_steps(3, 2, 3, rng);
  const Array weights = random_array(2, 4, rng);
  auto loss = [&](const auto& ctx) {
    using V = typename std::decay_t<decltype(ctx)>::Value;
    LstmState<V> s{ctx.constant(Array::zeros(2, 4)), ctx.constant(Array::zeros(2, 4))};
    for (const Array& x : xs) s = lstm_step(ctx, ctx.constant(x), s, p);
    return sum(mul(add(s.h, s.c), ctx.constant(weights)));
  };
  EXPECT_LE(worst_parameter_gradient_error({&p.wx, &p.wh, &p.b}, loss), 1.0);

  // Gradient with respect to the first input.
  Tape tape;
  TapeContext ctx{&tape};
  const Var x0 = tape.variable(xs[0]);
  LstmState<Var> s{ctx.constant(Array::zeros(2, 4)), ctx.constant(Array::zeros(2, 4))};
  s = lstm_step(ctx, x0, s, p);
  for (std::size_t t = 1; t < xs.size(); ++t) s = lstm_step(ctx, ctx.constant(xs[t]), s, p);
  tape.backward(sum(mul(add(s.h, s.c), ctx.constant(weights))));
  const Array numeric = testing::numeric_gradient([&] { return loss(EagerContext{}).item(); }, xs[0]);
  EXPECT_LE(testing::worst_gradient_error(x0.grad(), numeric), 1.0);
}

class EncDecTest : public ::testing::Test
{
protected:
  Rng rng{11};
  const std::vector<std::size_t> hidden{5, 3};
  EncDecParams params = EncDecParams::init(4, 3, hidden, rng);
  std::vector<Array> values = random_steps(6, 2, 4, rng);
  std::vector<Array> times = random_steps(6, 2, 3, rng);
  std::vector<Array> future = random_steps(3, 2, 3, rng);
};

TEST_F(EncDecTest, ShapesAndValidation)
{
  EXPECT_EQ(params.hidden_widths(), hidden);
  EXPECT_EQ(params.output_width(), 3u);
  EXPECT_EQ(params.parameters().size(), 12u);
  const auto enc = encode(EagerContext{}, params, values, times);
  EXPECT_EQ(enc.e.shape(), (Shape{2, 3}));
  EXPECT_EQ(enc.states.size(), 2u);
  const auto h = decode(EagerContext{}, params, enc, future);
  ASSERT_EQ(h.size(), 3u);
  for (const Array& step : h) EXPECT_EQ(step.shape(), (Shape{2, 3}));
  EXPECT_THROW(decode(EagerContext{}, params, enc, std::span<const Array>{}), std::invalid_argument);

  EncDecParams broken = params;
  broken.decoder.pop_back();
  EXPECT_THROW(broken.validate(), std::invalid_argument);
}

TEST_F(EncDecTest, SingleContextStepIsOneStackStep)
{
  const auto enc = encode(EagerContext{}, params, std::span(values).first(1), std::span(times).first(1));
  const Array parts[] = {values[0], times[0]};
  LstmState<Array> s0 = lstm_step(EagerContext{}, concat_cols(parts), {Array::zeros(2, 5), Array::zeros(2, 5)}, params.encoder[0]);
  LstmState<Array> s1 = lstm_step(EagerContext{}, s0.h, {Array::zeros(2, 3), Array::zeros(2, 3)}, params.encoder[1]);
  EXPECT_EQ(enc.e.data(), s1.h.data());
  EXPECT_EQ(enc.states[0].c.data(), s0.c.data());
}

TEST_F(EncDecTest, SinglePredictionStepStartsFromEncoderStates)
{
  const auto enc = encode(EagerContext{}, params, values, times);
  const auto h = decode(EagerContext{}, params, enc, std::span(future).first(1));
  const Array parts[] = {enc.e, future[0]};
  const LstmState<Array> s0 = lstm_step(EagerContext{}, concat_cols(parts), enc.states[0], params.decoder[0]);
  const LstmState<Array> s1 = lstm_step(EagerContext{}, s0.h, enc.states[1], params.decoder[1]);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].data(), s1.h.data());
}

TEST_F(EncDecTest, ContextOrderMatters)
{
  const auto a = encode(EagerContext{}, params, values, times);
  std::vector<Array> swapped = values;
  std::swap(swapped[0], swapped[4]);
  const auto b = encode(EagerContext{}, params, swapped, times);
  EXPECT_NE(a.e.data(), b.e.data());
}

TEST_F(EncDecTest, DeterministicAcrossContexts)
{
  const auto eager = decode(EagerContext{}, params, encode(EagerContext{}, params, values, times), future);
  Tape tape;
  TapeContext ctx{&tape};
  const auto taped = decode(ctx, params, encode(ctx, params, values, times), future);
  for (std::size_t t = 0; t < eager.size(); ++t) EXPECT_EQ(eager[t].data(), taped[t].value().data());
}

TEST_F(EncDecTest, FullEncoderDecoderGradientsMatchFiniteDifferences)
{
  const Array weights = random_array(2, 3, rng);
  auto loss = [&](const auto& ctx) {
    const auto enc = encode(ctx, params, values, times);
    const auto h = decode(ctx, params, enc, future);
    auto total = sum(mul(h[0], ctx.constant(weights)));
    for (std::size_t t = 1; t < h.size(); ++t) total = add(total, sum(mul(h[t], ctx.constant(weights))));
    return total;
  };
  EXPECT_LE(worst_parameter_gradient_error(params.parameters(), loss), 1.0);
}

}  // namespace
}  // namespace flowad
