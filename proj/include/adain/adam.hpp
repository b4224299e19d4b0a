#pragma once

#include <span>
#include <vector>

#include "adain/tensor.hpp"

namespace adain {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers for a fixed list of parameters. Buffers are allocated on
/// the first step and must keep matching the parameter shapes afterwards.
template <class Scalar>
struct AdamState {
  AdamOptions options;
  std::vector<Tensor<Scalar>> first_moment;
  std::vector<Tensor<Scalar>> second_moment;
  long step_count = 0;

  explicit AdamState(AdamOptions opts = {}) : options(opts) {}
};

/// One bias-corrected Adam update of `params` in place.
template <class Scalar>
void adam_step(std::span<Tensor<Scalar>> params, std::span<const Tensor<Scalar>> grads,
               AdamState<Scalar>& state);

/// Convenience overload reading each variable's accumulated gradient.
/// Variables without a gradient are treated as having a zero gradient.
template <class Scalar>
void adam_step(std::span<Variable<Scalar>> params, AdamState<Scalar>& state);

}  // namespace adain
