#pragma once

// Finite-difference checks for every differentiable operation, shared by the
// unit tests and the acceptance runner.

#include <string>
#include <vector>

#include "adain/loss.hpp"
#include "adain/normalization.hpp"
#include "adain/ops.hpp"
#include "support/gradcheck.hpp"

namespace adain::testing {

struct GradientCase {
  std::string name;
  double relative_error;
  Index max_elements;  // largest input checked
};

inline std::vector<GradientCase> run_gradient_suite(unsigned seed = 2024) {
  std::mt19937_64 rng(seed);
  std::vector<GradientCase> out;
  auto check = [&](std::string name, LossFn fn, std::vector<Variable<double>> inputs) {
    Index largest = 0;
    for (const auto& v : inputs) largest = std::max(largest, v.shape().size());
    out.push_back({std::move(name), max_relative_gradient_error(fn, std::move(inputs)), largest});
  };
  auto param = [&](Shape s, double lo = -1, double hi = 1) {
    return Variable<double>(random_tensor(s, rng, lo, hi), true);
  };

  check("conv2d",
        [](const auto& v) { return random_projection(conv2d(v[0], v[1], v[2], 1)); },
        {param({1, 2, 4, 4}), param({3, 2, 3, 3}), param({1, 3, 1, 1})});
  check("conv2d_stride2",
        [](const auto& v) { return random_projection(conv2d(v[0], v[1], v[2], 2)); },
        {param({2, 2, 5, 5}), param({2, 2, 3, 3}), param({1, 2, 1, 1})});
  check("reflection_pad2d", [](const auto& v) { return random_projection(reflection_pad2d(v[0], 2)); },
        {param({1, 2, 4, 5})});
  check("upsample_nearest2d",
        [](const auto& v) { return random_projection(upsample_nearest2d(v[0], 2)); },
        {param({2, 2, 3, 3})});
  // Distinct values keep the argmax stable inside the stencil.
  check("max_pool2d", [](const auto& v) { return random_projection(max_pool2d(v[0], 2, 2)); },
        {Variable<double>(random_tensor_away_from_zero({1, 3, 6, 6}, rng), true)});
  check("relu_conv_pad",
        [](const auto& v) {
          return random_projection(relu(conv2d(reflection_pad2d(v[0], 1), v[1], v[2])));
        },
        {Variable<double>(random_tensor_away_from_zero({1, 2, 4, 4}, rng), true),
         param({2, 2, 3, 3}), param({1, 2, 1, 1})});
  check("broadcast_arith",
        [](const auto& v) {
          return random_projection(div(mul(sub(v[0], v[1]), v[2]), add(v[3], v[3])));
        },
        {param({2, 3, 2, 2}), param({1, 3, 1, 1}), param({2, 3, 1, 1}),
         param({1, 3, 2, 2}, 1.0, 2.0)});
  check("gram", [](const auto& v) { return random_projection(gram(v[0])); }, {param({2, 3, 3, 4})});
  check("channel_std",
        [](const auto& v) {
          return add(random_projection(channel_std(v[0], 1e-5, true)),
                     random_projection(channel_std(v[0], 1e-5, false), 7));
        },
        {param({2, 3, 4, 4})});
  check("batch_norm",
        [](const auto& v) {
          return random_projection(
              batch_norm(v[0], AffineParams<double>{v[1], v[2]}, BatchNormSource::Minibatch));
        },
        {param({3, 2, 4, 4}), param({1, 2, 1, 1}), param({1, 2, 1, 1})});
  check("instance_norm",
        [](const auto& v) {
          return random_projection(instance_norm(v[0], AffineParams<double>{v[1], v[2]}));
        },
        {param({2, 3, 4, 4}), param({1, 3, 1, 1}), param({1, 3, 1, 1})});
  check("conditional_instance_norm",
        [](const auto& v) {
          return random_projection(
              conditional_instance_norm(v[0], CinParams<double>{v[1], v[2]}, 2));
        },
        {param({2, 3, 4, 4}), param({3, 3, 1, 1}), param({3, 3, 1, 1})});
  check("adain",
        [](const auto& v) { return random_projection(adain(v[0], v[1], 1e-5)); },
        {param({2, 4, 4, 4}), param({2, 4, 3, 5})});
  check("adain_broadcast_style",
        [](const auto& v) { return random_projection(adain(v[0], v[1], 1e-5)); },
        {param({3, 2, 4, 4}), param({1, 2, 4, 4})});
  check("content_loss",
        [](const auto& v) { return content_loss(v[0], v[1]); },
        {param({2, 4, 4, 4}), param({2, 4, 4, 4})});
  check("style_loss",
        [](const auto& v) {
          FeatureMaps<double> out{{"a", "b"}, {v[0], v[1]}};
          FeatureMaps<double> style{{"a", "b"}, {v[2], v[3]}};
          return style_loss(out, style, 1e-5).total;
        },
        {param({2, 3, 4, 4}), param({2, 4, 2, 2}), param({2, 3, 4, 4}), param({1, 4, 3, 3})});
  check("gram_loss",
        [](const auto& v) {
          FeatureMaps<double> out{{"a"}, {v[0]}};
          FeatureMaps<double> style{{"a"}, {v[1]}};
          return gram_loss(out, style);
        },
        {param({2, 3, 4, 4}), param({2, 3, 4, 4})});
  return out;
}

}  // namespace adain::testing
