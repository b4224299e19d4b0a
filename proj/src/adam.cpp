#include "adain/adam.hpp"

#include <cmath>

namespace adain {

namespace {

void validate(const AdamOptions& o) {
  if (!(o.lr > 0) || !(o.eps > 0)) throw ConfigError("adam", "Adam lr and eps must be positive");
  if (!(o.beta1 > 0 && o.beta1 < 1) || !(o.beta2 > 0 && o.beta2 < 1)) {
    throw ConfigError("adam", "Adam betas must lie in (0, 1)");
  }
}

}  // namespace

template <class Scalar>
void adam_step(std::span<Tensor<Scalar>> params, std::span<const Tensor<Scalar>> grads,
               AdamState<Scalar>& state) {
  validate(state.options);
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step got " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " grads");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("Adam state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, step received " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.first_moment[i].shape() != params[i].shape()) {
      throw DimensionError("Adam parameter " + std::to_string(i) + " shape " +
                           params[i].shape().str() + " does not match its gradient/moments");
    }
  }

  ++state.step_count;
  const auto& o = state.options;
  const auto t = static_cast<double>(state.step_count);
  const auto b1 = static_cast<Scalar>(o.beta1);
  const auto b2 = static_cast<Scalar>(o.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(o.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(o.beta2, t));
  const auto lr = static_cast<Scalar>(o.lr);
  const auto eps = static_cast<Scalar>(o.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i].array();
    auto& v = state.second_moment[i].array();
    const auto& g = grads[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[i].array() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

template <class Scalar>
void adam_step(std::span<Variable<Scalar>> params, AdamState<Scalar>& state) {
  std::vector<Tensor<Scalar>> values;
  std::vector<Tensor<Scalar>> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (auto& p : params) {
    values.push_back(std::move(p.mutable_value()));
    grads.push_back(p.grad());
  }
  adam_step<Scalar>(std::span<Tensor<Scalar>>(values), std::span<const Tensor<Scalar>>(grads),
                    state);
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value() = std::move(values[i]);
}

template void adam_step(std::span<Tensor<float>>, std::span<const Tensor<float>>,
                        AdamState<float>&);
template void adam_step(std::span<Tensor<double>>, std::span<const Tensor<double>>,
                        AdamState<double>&);
template void adam_step(std::span<Variable<float>>, AdamState<float>&);
template void adam_step(std::span<Variable<double>>, AdamState<double>&);

}  // namespace adain
