#include "adain/normalization.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adain/ops.hpp"

namespace adain {

namespace {

template <class Scalar>
Variable<Scalar> constant(Tensor<Scalar> t) {
  return Variable<Scalar>(std::move(t), false);
}

template <class Scalar>
void check_affine(const Shape& x, const Variable<Scalar>& gamma, const Variable<Scalar>& beta) {
  const Shape expect{1, x.c, 1, 1};
  if (gamma.shape() != expect || beta.shape() != expect) {
    throw DimensionError("affine parameters must be " + expect.str() + " for input " + x.str() +
                         ", got gamma " + gamma.shape().str() + " beta " + beta.shape().str());
  }
}

template <class Scalar>
Variable<Scalar> affine(const Variable<Scalar>& normalized, const Variable<Scalar>& gamma,
                        const Variable<Scalar>& beta) {
  return add(mul(normalized, gamma), beta);
}

}  // namespace

template <class Scalar>
ChannelStats<Scalar> batch_stats(const Tensor<Scalar>& x, Scalar eps) {
  if (x.size() == 0) throw DimensionError("batch_stats of an empty tensor " + x.shape().str());
  NoGradGuard guard;
  const Variable<Scalar> v(x);
  return {channel_mean(v, false).value(), channel_std(v, eps, false).value(), StatsMode::PerBatch,
          eps};
}

template <class Scalar>
ChannelStats<Scalar> instance_stats(const Tensor<Scalar>& x, Scalar eps) {
  if (x.size() == 0) throw DimensionError("instance_stats of an empty tensor " + x.shape().str());
  NoGradGuard guard;
  const Variable<Scalar> v(x);
  return {channel_mean(v, true).value(), channel_std(v, eps, true).value(), StatsMode::PerSample,
          eps};
}

template <class Scalar>
AffineParams<Scalar> AffineParams<Scalar>::identity(Index channels, bool trainable) {
  return {Variable<Scalar>(Tensor<Scalar>::constant({1, channels, 1, 1}, Scalar(1)), trainable),
          Variable<Scalar>(Tensor<Scalar>::zeros({1, channels, 1, 1}), trainable)};
}

template <class Scalar>
CinParams<Scalar> CinParams<Scalar>::identity(Index styles, Index channels, bool trainable) {
  return {Variable<Scalar>(Tensor<Scalar>::constant({styles, channels, 1, 1}, Scalar(1)), trainable),
          Variable<Scalar>(Tensor<Scalar>::zeros({styles, channels, 1, 1}), trainable)};
}

template <class Scalar>
PopulationStats<Scalar> PopulationStats<Scalar>::fresh(Index channels) {
  return {Tensor<Scalar>::zeros({1, channels, 1, 1}),
          Tensor<Scalar>::constant({1, channels, 1, 1}, Scalar(1))};
}

template <class Scalar>
Variable<Scalar> standardize(const Variable<Scalar>& x, Scalar eps, StatsMode mode) {
  const bool per_sample = mode == StatsMode::PerSample;
  return div(sub(x, channel_mean(x, per_sample)), channel_std(x, eps, per_sample));
}

template <class Scalar>
Variable<Scalar> batch_norm(const Variable<Scalar>& x, const AffineParams<Scalar>& params,
                            BatchNormSource source, PopulationStats<Scalar>* population,
                            Scalar eps) {
  check_affine(x.shape(), params.gamma, params.beta);
  if (source == BatchNormSource::Population) {
    if (population == nullptr || population->mean.empty()) {
      throw ContractError("batch_norm in population mode requires population statistics");
    }
    const Tensor<Scalar> sigma({1, x.shape().c, 1, 1},
                               (population->variance.array() + eps).sqrt());
    const auto normalized = div(sub(x, constant(population->mean)), constant(sigma));
    return affine(normalized, params.gamma, params.beta);
  }
  const auto mu = channel_mean(x, false);
  const auto sigma = channel_std(x, eps, false);
  if (population != nullptr) {
    if (population->mean.empty()) *population = PopulationStats<Scalar>::fresh(x.shape().c);
    const auto m = static_cast<Scalar>(kBatchNormMomentum);
    const auto variance = sigma.value().array().square() - eps;
    population->mean.array() = (Scalar(1) - m) * population->mean.array() + m * mu.value().array();
    population->variance.array() = (Scalar(1) - m) * population->variance.array() + m * variance;
  }
  return affine(div(sub(x, mu), sigma), params.gamma, params.beta);
}

template <class Scalar>
Variable<Scalar> instance_norm(const Variable<Scalar>& x, const AffineParams<Scalar>& params,
                               Scalar eps) {
  check_affine(x.shape(), params.gamma, params.beta);
  return affine(standardize(x, eps, StatsMode::PerSample), params.gamma, params.beta);
}

template <class Scalar>
Variable<Scalar> conditional_instance_norm(const Variable<Scalar>& x, const CinParams<Scalar>& table,
                                           Index style, Scalar eps) {
  if (style < 1 || style > table.styles()) {
    throw IndexError("style index " + std::to_string(style) + " outside 1.." +
                     std::to_string(table.styles()));
  }
  const AffineParams<Scalar> row{select_sample(table.gamma_table, style - 1),
                                 select_sample(table.beta_table, style - 1)};
  return instance_norm(x, row, eps);
}

template <class Scalar>
Variable<Scalar> adain(const Variable<Scalar>& x, const Variable<Scalar>& y, Scalar eps) {
  const Shape& xs = x.shape();
  const Shape& ys = y.shape();
  if (xs.c != ys.c) {
    throw DimensionError("adain channel mismatch: content " + xs.str() + " style " + ys.str());
  }
  if (ys.n != xs.n && ys.n != 1) {
    throw DimensionError("adain style batch must be 1 or match content: " + xs.str() + " vs " +
                         ys.str());
  }
  const auto mu_y = channel_mean(y, true);
  const auto sigma_y = channel_std(y, eps, true);
  return add(mul(standardize(x, eps, StatsMode::PerSample), sigma_y), mu_y);
}

template <class Scalar>
Variable<Scalar> adain_with_stats(const Variable<Scalar>& x, const StyleDescriptor& style,
                                  Scalar eps) {
  const Index c = x.shape().c;
  if (style.channels() != c || style.sigma.size() != c) {
    throw DimensionError("style descriptor has " + std::to_string(style.channels()) +
                         " channels, features have " + std::to_string(c));
  }
  const Tensor<Scalar> mu({1, c, 1, 1}, style.mu.array().template cast<Scalar>());
  const Tensor<Scalar> sigma({1, c, 1, 1}, style.sigma.array().template cast<Scalar>());
  return add(mul(standardize(x, eps, StatsMode::PerSample), constant(sigma)), constant(mu));
}

StyleDescriptor StyleDescriptor::from_features(const Tensor<float>& features, float eps) {
  if (features.shape().n != 1) {
    throw DimensionError("style descriptor needs a single-sample feature map, got " +
                         features.shape().str());
  }
  const auto stats = instance_stats(features, eps);
  return {stats.mu.array().matrix(), stats.sigma.array().matrix()};
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string StyleDescriptor::to_bytes() const {
  std::string out;
  out.reserve(4 + 8 * static_cast<std::size_t>(channels()));
  put_u32(out, static_cast<std::uint32_t>(channels()));
  for (const auto* v : {&mu, &sigma})
    for (Index i = 0; i < v->size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>((*v)[i]));
  return out;
}

StyleDescriptor StyleDescriptor::from_bytes(std::string_view bytes) {
  if (bytes.size() < 4) throw FormatError("channel_count", "style descriptor shorter than its header");
  const std::uint32_t c = get_u32(bytes, 0);
  if (bytes.size() != 4 + 8 * static_cast<std::size_t>(c)) {
    throw FormatError("length", "style descriptor declares " + std::to_string(c) +
                                    " channels but holds " + std::to_string(bytes.size()) + " bytes");
  }
  StyleDescriptor d{Eigen::VectorXf(c), Eigen::VectorXf(c)};
  for (std::uint32_t i = 0; i < c; ++i) {
    d.mu[i] = std::bit_cast<float>(get_u32(bytes, 4 + 4 * i));
    d.sigma[i] = std::bit_cast<float>(get_u32(bytes, 4 + 4 * (c + i)));
  }
  if (!d.mu.allFinite() || !d.sigma.allFinite() || (d.sigma.array() <= 0).any()) {
    throw FormatError("sigma", "style descriptor holds non-finite values or non-positive sigma");
  }
  return d;
}

void StyleDescriptor::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  const auto bytes = to_bytes();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path);
}

StyleDescriptor StyleDescriptor::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_bytes(ss.str());
}

#define ADAIN_INSTANTIATE_NORM(S)                                                              \
  template struct AffineParams<S>;                                                             \
  template struct CinParams<S>;                                                                \
  template struct PopulationStats<S>;                                                          \
  template ChannelStats<S> batch_stats(const Tensor<S>&, S);                                   \
  template ChannelStats<S> instance_stats(const Tensor<S>&, S);                                \
  template Variable<S> standardize(const Variable<S>&, S, StatsMode);                          \
  template Variable<S> batch_norm(const Variable<S>&, const AffineParams<S>&, BatchNormSource, \
                                  PopulationStats<S>*, S);                                     \
  template Variable<S> instance_norm(const Variable<S>&, const AffineParams<S>&, S);          \
  template Variable<S> conditional_instance_norm(const Variable<S>&, const CinParams<S>&,     \
                                                 Index, S);                                    \
  template Variable<S> adain(const Variable<S>&, const Variable<S>&, S);                       \
  template Variable<S> adain_with_stats(const Variable<S>&, const StyleDescriptor&, S);

ADAIN_INSTANTIATE_NORM(float)
ADAIN_INSTANTIATE_NORM(double)

}  // namespace adain
