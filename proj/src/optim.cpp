#include "flowad/optim.hpp"

#include <cmath>
#include <string>

namespace flowad
{

AdamState make_adam_state(std::span<Parameter* const> params, AdamOptions options)
{
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  AdamState state;
  state.options = options;
  for (const Parameter* p : params)
  {
    state.first_moment.push_back(Array::zeros_like(p->value));
    state.second_moment.push_back(Array::zeros_like(p->value));
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, AdamState& state)
{
  if (params.size() != state.first_moment.size())
  {
    throw ShapeError("adam: state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (const Parameter* p : params)
  {
    if (!p->grad.same_shape(p->value)) throw ShapeError("adam: gradient shape mismatch for " + p->name);
    if (!p->grad.all_finite()) throw TrainingError("adam: non-finite gradient in " + p->name);
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k)
  {
    Parameter& p = *params[k];
    Array& m = state.first_moment[k];
    Array& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.value.size(); ++i)
    {
      const double g = p.grad[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm)
{
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0)
  {
    const double f = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= f;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params)
{
  for (Parameter* p : params) p->zero_grad();
}

Array uniform_init(std::size_t rows, std::size_t cols, double bound, Rng& rng)
{
  Array a = Array::zeros(rows, cols);
  for (double& v : a.data()) v = rng.uniform(-bound, bound);
  return a;
}

}  // namespace flowad
