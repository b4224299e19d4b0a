#pragma once

#include <string>
#include <vector>

#include "adain/tensor.hpp"

namespace adain {

/// Named encoder activations in forward order (relu1_1 ... relu4_1).
template <class Scalar>
struct FeatureMaps {
  std::vector<std::string> names;
  std::vector<Variable<Scalar>> maps;

  std::size_t size() const { return maps.size(); }
  const Variable<Scalar>& last() const { return maps.back(); }
  const Variable<Scalar>& at(const std::string& name) const;
};

/// Mean squared difference between output features and the target.
template <class Scalar>
Variable<Scalar> content_loss(const Variable<Scalar>& output_features,
                              const Variable<Scalar>& target);

template <class Scalar>
struct StyleLoss {
  Variable<Scalar> total;
  std::vector<Variable<Scalar>> per_layer;
};

/// Sum over taps of ||mu(out) - mu(style)||_2 + ||sigma(out) - sigma(style)||_2
/// using per-sample channel statistics, averaged over the batch. Style maps may
/// hold one sample (shared by the whole batch) or one per output sample.
template <class Scalar>
StyleLoss<Scalar> style_loss(const FeatureMaps<Scalar>& output, const FeatureMaps<Scalar>& style,
                             Scalar eps);

/// Sum over taps of the mean squared difference of normalized Gram matrices.
template <class Scalar>
Variable<Scalar> gram_loss(const FeatureMaps<Scalar>& output, const FeatureMaps<Scalar>& style);

/// content + lambda * style, differentiable.
template <class Scalar>
Variable<Scalar> weighted_total(const Variable<Scalar>& content, const Variable<Scalar>& style,
                                Scalar lambda);

struct LossReport {
  double content = 0;
  double style = 0;
  double total = 0;
  double lambda = 0;
  std::vector<double> per_layer_style;
};

/// Builds a report with total = content + lambda * style. Negative lambda is a ConfigError.
LossReport total_loss(double content, double style, double lambda,
                      std::vector<double> per_layer_style = {});

/// Report from differentiable loss terms.
template <class Scalar>
LossReport make_report(const Variable<Scalar>& content, const StyleLoss<Scalar>& style,
                       double lambda);

/// "iteration,content,style,total,<layer>..." header and matching rows.
std::string loss_csv_header(const std::vector<std::string>& layer_names);
std::string loss_csv_row(long iteration, const LossReport& report);

}  // namespace adain
