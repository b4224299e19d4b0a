#include "adain/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "adain/ops.hpp"

namespace adain {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Upsample: return "upsample";
    case LayerKind::InstanceNorm: return "instance_norm";
    case LayerKind::BatchNorm: return "batch_norm";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (auto k : {LayerKind::Conv, LayerKind::Relu, LayerKind::MaxPool, LayerKind::Upsample,
                 LayerKind::InstanceNorm, LayerKind::BatchNorm}) {
    if (name == to_string(k)) return k;
  }
  throw FormatError("layers", "unknown layer type '" + name + "'");
}

const char* to_string(NormKind kind) {
  switch (kind) {
    case NormKind::None: return "none";
    case NormKind::Instance: return "instance";
    case NormKind::Batch: return "batch";
  }
  return "?";
}

const char* to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::AdaIN: return "adain";
    case Fusion::Concat: return "concat";
    case Fusion::None: return "none";
  }
  return "?";
}

Fusion parse_fusion(const std::string& name) {
  for (auto f : {Fusion::AdaIN, Fusion::Concat, Fusion::None})
    if (name == to_string(f)) return f;
  throw FormatError("fusion", "unknown fusion '" + name + "'");
}

LayerSpec LayerSpec::conv(std::string name, Index in, Index out, Index kernel) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.name = std::move(name);
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  return s;
}

LayerSpec LayerSpec::relu(std::string name, bool tap) {
  LayerSpec s;
  s.kind = LayerKind::Relu;
  s.name = std::move(name);
  s.tap = tap;
  return s;
}

LayerSpec LayerSpec::pool(Index kernel, Index stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.kernel = kernel;
  s.factor = stride;
  return s;
}

LayerSpec LayerSpec::upsample(Index factor) {
  LayerSpec s;
  s.kind = LayerKind::Upsample;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::norm(LayerKind kind, std::string name, Index channels) {
  LayerSpec s;
  s.kind = kind;
  s.name = std::move(name);
  s.in_channels = channels;
  s.out_channels = channels;
  return s;
}

// ---------------------------------------------------------------------------

Sequential::Sequential(std::string prefix, std::vector<LayerSpec> layers)
    : prefix_(std::move(prefix)), layers_(std::move(layers)), state_(layers_.size()) {
  validate();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& st = state_[i];
    if (l.kind == LayerKind::Conv) {
      st.weight = Variable<float>(Tensorf({l.out_channels, l.in_channels, l.kernel, l.kernel}));
      st.bias = Variable<float>(Tensorf({1, l.out_channels, 1, 1}));
    } else if (l.kind == LayerKind::InstanceNorm || l.kind == LayerKind::BatchNorm) {
      st.affine = AffineParams<float>::identity(l.out_channels);
      if (l.kind == LayerKind::BatchNorm) st.population = PopulationStats<float>::fresh(l.out_channels);
    }
  }
}

void Sequential::validate() const {
  Index channels = -1;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.in_channels < 1 || l.out_channels < 1 || l.kernel < 1 || l.kernel % 2 == 0) {
          throw ConfigError("layers", "conv " + l.name + " needs positive channels and an odd kernel");
        }
        if (channels >= 0 && channels != l.in_channels) {
          throw ConfigError("layers", "conv " + l.name + " expects " + std::to_string(l.in_channels) +
                                          " channels but receives " + std::to_string(channels));
        }
        channels = l.out_channels;
        break;
      case LayerKind::InstanceNorm:
      case LayerKind::BatchNorm:
        if (channels >= 0 && channels != l.out_channels) {
          throw ConfigError("layers", "norm " + l.name + " channel count mismatch");
        }
        break;
      case LayerKind::MaxPool:
      case LayerKind::Upsample:
        if (l.kernel < 1 || l.factor < 1) throw ConfigError("layers", "window and factor must be >= 1");
        break;
      case LayerKind::Relu:
        if (l.tap && l.name.empty()) throw ConfigError("layers", "tapped relu needs a name");
        break;
    }
  }
  if (channels < 0) throw ConfigError("layers", "layer table has no convolution");
}

void Sequential::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& st = state_[i];
    if (l.kind == LayerKind::Conv) {
      std::normal_distribution<float> dist(
          0.f, std::sqrt(2.f / static_cast<float>(l.in_channels * l.kernel * l.kernel)));
      auto& w = st.weight.mutable_value();
      for (Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
      st.bias.mutable_value().array().setZero();
    } else if (l.kind == LayerKind::InstanceNorm || l.kind == LayerKind::BatchNorm) {
      st.affine.gamma.mutable_value().array().setOnes();
      st.affine.beta.mutable_value().array().setZero();
      if (l.kind == LayerKind::BatchNorm) st.population = PopulationStats<float>::fresh(l.out_channels);
    }
  }
}

std::vector<Sequential::Parameter> Sequential::parameters() {
  std::vector<Parameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& st = state_[i];
    const std::string base = prefix_ + "." + l.name + ".";
    if (l.kind == LayerKind::Conv) {
      out.push_back({base + "weight", &st.weight});
      out.push_back({base + "bias", &st.bias});
    } else if (l.kind == LayerKind::InstanceNorm || l.kind == LayerKind::BatchNorm) {
      out.push_back({base + "gamma", &st.affine.gamma});
      out.push_back({base + "beta", &st.affine.beta});
    }
  }
  return out;
}

void Sequential::set_trainable(bool trainable) {
  for (auto& p : parameters()) *p.value = Variable<float>(p.value->value(), trainable);
}

std::vector<Variable<float>> Sequential::trainable_variables() const {
  std::vector<Variable<float>> out;
  for (auto& p : const_cast<Sequential*>(this)->parameters())
    if (p.value->requires_grad()) out.push_back(*p.value);
  return out;
}

std::vector<std::pair<std::string, Tensorf>> Sequential::state() const {
  std::vector<std::pair<std::string, Tensorf>> out;
  for (auto& p : const_cast<Sequential*>(this)->parameters()) out.emplace_back(p.name, p.value->value());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::BatchNorm) continue;
    const std::string base = prefix_ + "." + layers_[i].name + ".";
    out.emplace_back(base + "running_mean", state_[i].population.mean);
    out.emplace_back(base + "running_var", state_[i].population.variance);
  }
  return out;
}

void Sequential::load_state(const std::vector<std::pair<std::string, Tensorf>>& tensors) {
  auto params = parameters();
  std::vector<std::pair<std::string, Tensorf*>> slots;
  for (auto& p : params) slots.emplace_back(p.name, nullptr);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::BatchNorm) continue;
    const std::string base = prefix_ + "." + layers_[i].name + ".";
    slots.emplace_back(base + "running_mean", &state_[i].population.mean);
    slots.emplace_back(base + "running_var", &state_[i].population.variance);
  }
  std::vector<bool> seen(slots.size(), false);
  for (const auto& [name, value] : tensors) {
    std::size_t k = 0;
    while (k < slots.size() && slots[k].first != name) ++k;
    if (k == slots.size()) throw FormatError("tensors", "unexpected tensor " + name);
    const Shape expected = k < params.size() ? params[k].value->shape() : slots[k].second->shape();
    if (value.shape() != expected) {
      throw FormatError("shape", name + " has shape " + value.shape().str() + ", expected " +
                                     expected.str());
    }
    if (!value.all_finite()) throw FormatError("values", name + " holds non-finite values");
    if (k < params.size()) {
      *params[k].value = Variable<float>(value, params[k].value->requires_grad());
    } else {
      *slots[k].second = value;
    }
    seen[k] = true;
  }
  for (std::size_t k = 0; k < slots.size(); ++k)
    if (!seen[k]) throw FormatError("tensors", "missing tensor " + slots[k].first);
}

Index Sequential::input_channels() const {
  for (const auto& l : layers_)
    if (l.kind == LayerKind::Conv) return l.in_channels;
  return 0;
}

Index Sequential::output_channels() const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    if (it->kind == LayerKind::Conv) return it->out_channels;
  return 0;
}

Index Sequential::downsampling() const {
  Index f = 1;
  for (const auto& l : layers_)
    if (l.kind == LayerKind::MaxPool) f *= l.factor;
  return f;
}

Index Sequential::upsampling() const {
  Index f = 1;
  for (const auto& l : layers_)
    if (l.kind == LayerKind::Upsample) f *= l.factor;
  return f;
}

std::vector<std::string> Sequential::tap_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers_)
    if (l.tap) out.push_back(l.name);
  return out;
}

std::uint64_t Sequential::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : state()) {
    mix(name.data(), name.size());
    mix(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
  }
  return h;
}

Variable<float> Sequential::run(const Variable<float>& input, float eps, FeatureMaps<float>* taps,
                                const std::string& stop_after,
                                std::vector<LayerState>* update) const {
  Variable<float> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const auto& st = state_[i];
    switch (l.kind) {
      case LayerKind::Conv:
        x = conv2d(l.kernel > 1 ? reflection_pad2d(x, l.kernel / 2) : x, st.weight, st.bias, 1);
        break;
      case LayerKind::Relu:
        x = relu(x);
        break;
      case LayerKind::MaxPool:
        x = max_pool2d(x, l.kernel, l.factor);
        break;
      case LayerKind::Upsample:
        x = upsample_nearest2d(x, l.factor);
        break;
      case LayerKind::InstanceNorm:
        x = instance_norm(x, st.affine, eps);
        break;
      case LayerKind::BatchNorm:
        if (update) {
          x = batch_norm(x, st.affine, BatchNormSource::Minibatch, &(*update)[i].population, eps);
        } else {
          auto population = st.population;
          x = batch_norm(x, st.affine, BatchNormSource::Population, &population, eps);
        }
        break;
    }
    if (l.tap) {
      if (taps) {
        taps->names.push_back(l.name);
        taps->maps.push_back(x);
      }
      if (l.name == stop_after) break;
    }
  }
  return x;
}

Variable<float> Sequential::forward(const Variable<float>& x, ForwardMode mode, float eps,
                                    FeatureMaps<float>* taps, const std::string& stop_after) {
  return run(x, eps, taps, stop_after, mode == ForwardMode::Training ? &state_ : nullptr);
}

Variable<float> Sequential::forward(const Variable<float>& x, float eps, FeatureMaps<float>* taps,
                                    const std::string& stop_after) const {
  return run(x, eps, taps, stop_after, nullptr);
}

// ---------------------------------------------------------------------------

Encoder::Encoder(std::vector<LayerSpec> layers, Preprocess preprocess)
    : net_("encoder", std::move(layers)), preprocess_(std::move(preprocess)) {
  const auto taps = net_.tap_names();
  if (taps.empty()) throw ConfigError("layers", "encoder has no taps");
  last_tap_ = taps.back();
  if (net_.input_channels() != 3) throw ConfigError("layers", "encoder must take 3 input channels");

  std::array<int, 3> source{0, 1, 2};
  if (preprocess_.order == "BGR") {
    source = {2, 1, 0};
  } else if (preprocess_.order != "RGB") {
    throw ConfigError("preprocess", "channel order must be RGB or BGR, got " + preprocess_.order);
  }
  Tensorf w({3, 3, 1, 1});
  Tensorf b({1, 3, 1, 1});
  for (int o = 0; o < 3; ++o) {
    if (!(preprocess_.std[o] > 0.f) || !(preprocess_.scale > 0.f)) {
      throw ConfigError("preprocess", "std and scale must be positive");
    }
    w(o, source[o], 0, 0) = preprocess_.scale / preprocess_.std[o];
    b(0, o, 0, 0) = -preprocess_.mean[o] / preprocess_.std[o];
  }
  pre_weight_ = Variable<float>(std::move(w));
  pre_bias_ = Variable<float>(std::move(b));
}

void Encoder::check_input(const Shape& s) const {
  if (s.c != 3) throw DimensionError("encoder expects 3-channel images, got " + s.str());
  if (s.h < min_input_size() || s.w < min_input_size()) {
    throw DimensionError("image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is smaller than the encoder minimum " + std::to_string(min_input_size()));
  }
}

FeatureMaps<float> Encoder::forward(const Variable<float>& images) const {
  check_input(images.shape());
  FeatureMaps<float> taps;
  net_.forward(conv2d(images, pre_weight_, pre_bias_, 1), 0.f, &taps, last_tap_);
  return taps;
}

Variable<float> Encoder::features(const Variable<float>& images) const {
  check_input(images.shape());
  return net_.forward(conv2d(images, pre_weight_, pre_bias_, 1), 0.f, nullptr, last_tap_);
}

// ---------------------------------------------------------------------------

std::vector<LayerSpec> tiny_encoder_layers() {
  using L = LayerSpec;
  return {L::conv("conv1_1", 3, 16),  L::relu("relu1_1", true), L::pool(),
          L::conv("conv2_1", 16, 32), L::relu("relu2_1", true), L::pool(),
          L::conv("conv3_1", 32, 64), L::relu("relu3_1", true), L::pool(),
          L::conv("conv4_1", 64, 64), L::relu("relu4_1", true)};
}

std::vector<LayerSpec> reference_encoder_layers() {
  using L = LayerSpec;
  return {L::conv("conv1_1", 3, 64),    L::relu("relu1_1", true), L::conv("conv1_2", 64, 64),
          L::relu("relu1_2"),           L::pool(),                L::conv("conv2_1", 64, 128),
          L::relu("relu2_1", true),     L::conv("conv2_2", 128, 128), L::relu("relu2_2"),
          L::pool(),                    L::conv("conv3_1", 128, 256), L::relu("relu3_1", true),
          L::conv("conv3_2", 256, 256), L::relu("relu3_2"),       L::conv("conv3_3", 256, 256),
          L::relu("relu3_3"),           L::conv("conv3_4", 256, 256), L::relu("relu3_4"),
          L::pool(),                    L::conv("conv4_1", 256, 512), L::relu("relu4_1", true)};
}

namespace {

// Builds conv(+norm)+relu blocks from (in, out, upsample-after) rows, then a linear output conv.
std::vector<LayerSpec> decoder_table(const std::vector<std::array<Index, 3>>& rows, Index last_in,
                                     NormKind norm) {
  std::vector<LayerSpec> out;
  int index = 0;
  for (const auto& [in, ch, up] : rows) {
    ++index;
    out.push_back(LayerSpec::conv("conv" + std::to_string(index), in, ch));
    if (norm != NormKind::None) {
      out.push_back(LayerSpec::norm(norm == NormKind::Instance ? LayerKind::InstanceNorm
                                                               : LayerKind::BatchNorm,
                                    "norm" + std::to_string(index), ch));
    }
    out.push_back(LayerSpec::relu("relu" + std::to_string(index)));
    if (up) out.push_back(LayerSpec::upsample(2));
  }
  out.push_back(LayerSpec::conv("conv" + std::to_string(index + 1), last_in, 3));
  return out;
}

}  // namespace

std::vector<LayerSpec> tiny_decoder_layers(Index input_channels, NormKind norm) {
  return decoder_table({{input_channels, 64, 1}, {64, 32, 1}, {32, 16, 1}, {16, 16, 0}}, 16, norm);
}

std::vector<LayerSpec> reference_decoder_layers(Index input_channels, NormKind norm) {
  return decoder_table({{input_channels, 256, 1},
                        {256, 256, 0},
                        {256, 256, 0},
                        {256, 256, 0},
                        {256, 128, 1},
                        {128, 128, 0},
                        {128, 64, 1},
                        {64, 64, 0}},
                       64, norm);
}

Preprocess tiny_preprocess() {
  Preprocess p;
  p.mean = {0.5f, 0.5f, 0.5f};
  p.std = {0.25f, 0.25f, 0.25f};
  return p;
}

std::shared_ptr<const Encoder> make_tiny_encoder(std::uint64_t seed) {
  auto enc = std::make_shared<Encoder>(tiny_encoder_layers(), tiny_preprocess());
  enc->mutable_network().init_random(seed);
  return enc;
}

std::shared_ptr<const Encoder> make_reference_encoder(std::uint64_t seed) {
  Preprocess p;
  p.mean = {0.485f, 0.456f, 0.406f};
  p.std = {0.229f, 0.224f, 0.225f};
  auto enc = std::make_shared<Encoder>(reference_encoder_layers(), p);
  enc->mutable_network().init_random(seed);
  return enc;
}

Sequential make_decoder(const Encoder& encoder, NormKind norm, Fusion fusion, std::uint64_t seed) {
  const Index c = encoder.output_channels();
  const Index in = fusion == Fusion::Concat ? 2 * c : c;
  const bool reference = c >= 512;
  Sequential dec("decoder", reference ? reference_decoder_layers(in, norm) : tiny_decoder_layers(in, norm));
  if (dec.upsampling() != encoder.downsampling()) {
    throw ConfigError("layers", "decoder upsampling does not undo encoder downsampling");
  }
  dec.init_random(seed);
  return dec;
}

// ---------------------------------------------------------------------------

StyleTransferModel::StyleTransferModel(std::shared_ptr<const Encoder> encoder, Sequential decoder,
                                       Fusion fusion, float eps)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), fusion_(fusion), eps_(eps) {
  if (!encoder_) throw ConfigError("encoder", "model needs an encoder");
  const Index c = encoder_->output_channels();
  const Index expected = fusion_ == Fusion::Concat ? 2 * c : c;
  if (decoder_.input_channels() != expected) {
    throw ConfigError("decoder", "decoder takes " + std::to_string(decoder_.input_channels()) +
                                     " channels but the encoder provides " + std::to_string(expected));
  }
  if (decoder_.output_channels() != 3) throw ConfigError("decoder", "decoder must output 3 channels");
  if (!(eps_ > 0.f)) throw ConfigError("eps", "eps must be positive");
}

FeatureMaps<float> StyleTransferModel::encode(const Tensorf& images) const {
  NoGradGuard guard;
  return encoder_->forward(Variable<float>(images));
}

Tensorf StyleTransferModel::features(const Tensorf& images) const {
  NoGradGuard guard;
  return encoder_->features(Variable<float>(images)).value();
}

Tensorf StyleTransferModel::decode(const Tensorf& t) const {
  if (t.shape().c != decoder_.input_channels()) {
    throw DimensionError("decoder expects " + std::to_string(decoder_.input_channels()) +
                         " channels, got " + t.shape().str());
  }
  NoGradGuard guard;
  return decoder_.forward(Variable<float>(t), eps_).value();
}

Tensorf StyleTransferModel::fuse(const Tensorf& fc, const Tensorf& fs) const {
  NoGradGuard guard;
  switch (fusion_) {
    case Fusion::AdaIN:
      return adain(Variable<float>(fc), Variable<float>(fs), eps_).value();
    case Fusion::Concat:
      return concat_channels(Variable<float>(fc), Variable<float>(fs)).value();
    case Fusion::None:
      return fc;
  }
  return fc;
}

Tensorf StyleTransferModel::transfer(const Image& content, const Image& style) const {
  return decode(fuse(features(content), features(style)));
}

StyleDescriptor StyleTransferModel::encode_style(const Image& style) const {
  check_image(style);
  return StyleDescriptor::from_features(features(style), eps_);
}

Tensorf StyleTransferModel::transfer(const Image& content, const StyleDescriptor& style) const {
  if (fusion_ != Fusion::AdaIN) throw ConfigError("fusion", "descriptors need an AdaIN model");
  NoGradGuard guard;
  const auto t = adain_with_stats(Variable<float>(features(content)), style, eps_);
  return decode(t.value());
}

Tensorf StyleTransferModel::reconstruct(const Image& content) const {
  return decode(features(content));
}

StyleTransferModel make_tiny_model(std::uint64_t seed, NormKind norm, Fusion fusion) {
  auto enc = make_tiny_encoder(seed);
  auto dec = make_decoder(*enc, norm, fusion, seed + 1);
  return StyleTransferModel(std::move(enc), std::move(dec), fusion);
}

StyleTransferModel make_reference_model(std::uint64_t seed) {
  auto enc = make_reference_encoder(seed);
  auto dec = make_decoder(*enc, NormKind::None, Fusion::AdaIN, seed + 1);
  return StyleTransferModel(std::move(enc), std::move(dec), Fusion::AdaIN);
}

}  // namespace adain
