#include "adain/loss.hpp"

#include <cstdio>

#include "adain/ops.hpp"

namespace adain {

template <class Scalar>
const Variable<Scalar>& FeatureMaps<Scalar>::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return maps[i];
  throw IndexError("no feature tap named " + name);
}

namespace {

template <class Scalar>
void check_taps(const FeatureMaps<Scalar>& a, const FeatureMaps<Scalar>& b) {
  if (a.names != b.names || a.maps.size() != b.maps.size() || a.maps.empty()) {
    throw DimensionError("loss inputs must expose the same, non-empty tap set");
  }
}

}  // namespace

template <class Scalar>
Variable<Scalar> content_loss(const Variable<Scalar>& output_features,
                              const Variable<Scalar>& target) {
  return mse(output_features, target);
}

template <class Scalar>
StyleLoss<Scalar> style_loss(const FeatureMaps<Scalar>& output, const FeatureMaps<Scalar>& style,
                             Scalar eps) {
  check_taps(output, style);
  StyleLoss<Scalar> result;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const auto& o = output.maps[i];
    const auto& s = style.maps[i];
    if (o.shape().c != s.shape().c || (s.shape().n != 1 && s.shape().n != o.shape().n)) {
      throw DimensionError("style loss tap " + output.names[i] + " shape mismatch " +
                           o.shape().str() + " vs " + s.shape().str());
    }
    const auto mu_term = mean(sample_norm(sub(channel_mean(o, true), channel_mean(s, true))));
    const auto sigma_term =
        mean(sample_norm(sub(channel_std(o, eps, true), channel_std(s, eps, true))));
    result.per_layer.push_back(add(mu_term, sigma_term));
    result.total = i == 0 ? result.per_layer.back() : add(result.total, result.per_layer.back());
  }
  return result;
}

template <class Scalar>
Variable<Scalar> gram_loss(const FeatureMaps<Scalar>& output, const FeatureMaps<Scalar>& style) {
  check_taps(output, style);
  Variable<Scalar> total;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const auto d = sub(gram(output.maps[i]), gram(style.maps[i]));
    const auto term = mean(mul(d, d));
    total = i == 0 ? term : add(total, term);
  }
  return total;
}

template <class Scalar>
Variable<Scalar> weighted_total(const Variable<Scalar>& content, const Variable<Scalar>& style,
                                Scalar lambda) {
  if (lambda < 0) throw ConfigError("lambda", "style weight lambda must be >= 0");
  return add(content, scale(style, lambda));
}

LossReport total_loss(double content, double style, double lambda,
                      std::vector<double> per_layer_style) {
  if (lambda < 0) throw ConfigError("lambda", "style weight lambda must be >= 0");
  return {content, style, content + lambda * style, lambda, std::move(per_layer_style)};
}

template <class Scalar>
LossReport make_report(const Variable<Scalar>& content, const StyleLoss<Scalar>& style,
                       double lambda) {
  std::vector<double> layers;
  for (const auto& l : style.per_layer) layers.push_back(static_cast<double>(l.value().data()[0]));
  double style_sum = 0;
  for (double v : layers) style_sum += v;
  return total_loss(static_cast<double>(content.value().data()[0]), style_sum, lambda,
                    std::move(layers));
}

std::string loss_csv_header(const std::vector<std::string>& layer_names) {
  std::string h = "iteration,content,style,total";
  for (const auto& n : layer_names) h += "," + n;
  return h;
}

std::string loss_csv_row(long iteration, const LossReport& r) {
  char buf[64];
  std::string row = std::to_string(iteration);
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.9g", v);
    row += buf;
  };
  put(r.content);
  put(r.style);
  put(r.total);
  for (double v : r.per_layer_style) put(v);
  return row;
}

#define ADAIN_INSTANTIATE_LOSS(S)                                                               \
  template struct FeatureMaps<S>;                                                               \
  template Variable<S> content_loss(const Variable<S>&, const Variable<S>&);                    \
  template StyleLoss<S> style_loss(const FeatureMaps<S>&, const FeatureMaps<S>&, S);            \
  template Variable<S> gram_loss(const FeatureMaps<S>&, const FeatureMaps<S>&);                 \
  template Variable<S> weighted_total(const Variable<S>&, const Variable<S>&, S);               \
  template LossReport make_report(const Variable<S>&, const StyleLoss<S>&, double);

ADAIN_INSTANTIATE_LOSS(float)
ADAIN_INSTANTIATE_LOSS(double)

}  // namespace adain
