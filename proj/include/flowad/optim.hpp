#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "flowad/autodiff.hpp"
#include "flowad/rng.hpp"

namespace flowad
{

/// Raised when an optimization step meets a non-finite value.
class TrainingError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions
{
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState
{
  AdamOptions options;
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<Parameter* const> params, AdamOptions options);

/// One bias-corrected Adam update using each parameter's grad.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// Rescales all gradients so their joint L2 norm is at most max_norm; returns
/// the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grads(std::span<Parameter* const> params);

/// Uniform(-bound, bound) initialisation.
Array uniform_init(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace flowad
