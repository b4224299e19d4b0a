#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

#include "adain/tensor.hpp"

namespace adain {

inline constexpr double kDefaultEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class StatsMode { PerSample, PerBatch };

/// Channel means and deviations. PerSample stats are (N, C, 1, 1), PerBatch
/// stats are (1, C, 1, 1). sigma = sqrt(biased variance + eps).
template <class Scalar>
struct ChannelStats {
  Tensor<Scalar> mu;
  Tensor<Scalar> sigma;
  StatsMode mode = StatsMode::PerSample;
  Scalar eps = Scalar(kDefaultEps);
};

template <class Scalar>
ChannelStats<Scalar> batch_stats(const Tensor<Scalar>& x, Scalar eps = Scalar(kDefaultEps));

template <class Scalar>
ChannelStats<Scalar> instance_stats(const Tensor<Scalar>& x, Scalar eps = Scalar(kDefaultEps));

/// Per-channel gamma/beta, each stored as a (1, C, 1, 1) variable.
template <class Scalar>
struct AffineParams {
  Variable<Scalar> gamma;
  Variable<Scalar> beta;

  /// gamma = 1, beta = 0.
  static AffineParams identity(Index channels, bool trainable = false);
  Index channels() const { return gamma.shape().c; }
};

/// One row of gamma/beta per style: tables are (S, C, 1, 1).
template <class Scalar>
struct CinParams {
  Variable<Scalar> gamma_table;
  Variable<Scalar> beta_table;

  static CinParams identity(Index styles, Index channels, bool trainable = false);
  Index styles() const { return gamma_table.shape().n; }
  Index channels() const { return gamma_table.shape().c; }
  /// Learnable values held by this layer: 2 * C * S.
  Index parameter_count() const { return 2 * styles() * channels(); }
};

/// Running statistics kept by a BN layer for inference.
template <class Scalar>
struct PopulationStats {
  Tensor<Scalar> mean;      // (1, C, 1, 1)
  Tensor<Scalar> variance;  // (1, C, 1, 1), biased

  static PopulationStats fresh(Index channels);
};

enum class BatchNormSource { Minibatch, Population };

/// gamma * (x - mu) / sigma + beta with per-channel batch statistics.
/// Minibatch mode updates `population` (when given) with momentum 0.1;
/// Population mode requires it and treats it as constant.
template <class Scalar>
Variable<Scalar> batch_norm(const Variable<Scalar>& x, const AffineParams<Scalar>& params,
                            BatchNormSource source, PopulationStats<Scalar>* population = nullptr,
                            Scalar eps = Scalar(kDefaultEps));

/// Same code path at train and test time.
template <class Scalar>
Variable<Scalar> instance_norm(const Variable<Scalar>& x, const AffineParams<Scalar>& params,
                               Scalar eps = Scalar(kDefaultEps));

/// Instance norm with row `style` (1-based) of the parameter tables.
template <class Scalar>
Variable<Scalar> conditional_instance_norm(const Variable<Scalar>& x, const CinParams<Scalar>& table,
                                           Index style, Scalar eps = Scalar(kDefaultEps));

/// sigma(y) * (x - mu(x)) / sigma(x) + mu(y) with per-sample channel statistics.
/// y may have the same batch size as x or a single sample; spatial sizes may differ.
template <class Scalar>
Variable<Scalar> adain(const Variable<Scalar>& x, const Variable<Scalar>& y,
                       Scalar eps = Scalar(kDefaultEps));

/// Channel mean/deviation of one style's features, as used by AdaIN.
struct StyleDescriptor {
  Eigen::VectorXf mu;
  Eigen::VectorXf sigma;

  Index channels() const { return mu.size(); }

  /// Stats of a single-sample feature map.
  static StyleDescriptor from_features(const Tensor<float>& features, float eps);

  /// u32 LE channel count, then mu then sigma as f32 LE.
  std::string to_bytes() const;
  static StyleDescriptor from_bytes(std::string_view bytes);
  void save(const std::string& path) const;
  static StyleDescriptor load(const std::string& path);

  friend bool operator==(const StyleDescriptor& a, const StyleDescriptor& b) {
    return a.mu.size() == b.mu.size() && a.sigma.size() == b.sigma.size() &&
           (a.mu.array() == b.mu.array()).all() && (a.sigma.array() == b.sigma.array()).all();
  }
};

/// AdaIN against stored statistics; bit-identical to adain(x, y) when the
/// descriptor was computed from y.
template <class Scalar>
Variable<Scalar> adain_with_stats(const Variable<Scalar>& x, const StyleDescriptor& style,
                                  Scalar eps = Scalar(kDefaultEps));

/// (x - mu) / sigma, per sample or per batch.
template <class Scalar>
Variable<Scalar> standardize(const Variable<Scalar>& x, Scalar eps, StatsMode mode);

}  // namespace adain
