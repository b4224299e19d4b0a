#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "adain/image.hpp"
#include "adain/loss.hpp"
#include "adain/normalization.hpp"
#include "adain/tensor.hpp"

namespace adain {

enum class LayerKind { Conv, Relu, MaxPool, Upsample, InstanceNorm, BatchNorm };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

/// One entry of a layer table. Convs are 3x3-style with reflection padding of
/// kernel / 2 in front; relus marked `tap` expose their output by name.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  Index in_channels = 0;
  Index out_channels = 0;  // conv output, or channel count of a norm layer
  Index kernel = 3;        // conv kernel or pool window
  Index factor = 2;        // pool stride or upsample factor
  bool tap = false;

  static LayerSpec conv(std::string name, Index in, Index out, Index kernel = 3);
  static LayerSpec relu(std::string name, bool tap = false);
  static LayerSpec pool(Index kernel = 2, Index stride = 2);
  static LayerSpec upsample(Index factor = 2);
  static LayerSpec norm(LayerKind kind, std::string name, Index channels);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class NormKind { None, Instance, Batch };

const char* to_string(NormKind kind);

/// Per-channel input transform: x' = (x * scale - mean) / std, channels
/// reordered to `order` ("RGB" or "BGR").
struct Preprocess {
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  std::array<float, 3> std{1.f, 1.f, 1.f};
  std::string order = "RGB";
  float scale = 1.f;

  friend bool operator==(const Preprocess&, const Preprocess&) = default;
};

enum class ForwardMode { Inference, Training };

/// A layer table with its parameters. BN layers keep running statistics,
/// updated by Training-mode forwards.
class Sequential {
 public:
  struct Parameter {
    std::string name;
    Variable<float>* value;
  };

  Sequential() = default;
  Sequential(std::string prefix, std::vector<LayerSpec> layers);

  /// He-normal conv weights, zero biases, identity affine norms.
  void init_random(std::uint64_t seed);
  void set_trainable(bool trainable);

  /// Runs the table. Tapped relu outputs are appended to `taps` when given;
  /// forwarding stops after the tap named `stop_after` if non-empty.
  Variable<float> forward(const Variable<float>& x, ForwardMode mode, float eps,
                          FeatureMaps<float>* taps = nullptr,
                          const std::string& stop_after = "");
  Variable<float> forward(const Variable<float>& x, float eps, FeatureMaps<float>* taps = nullptr,
                          const std::string& stop_after = "") const;

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::string& prefix() const { return prefix_; }

  /// Learnable tensors in layer order ("<prefix>.<layer>.weight", ...).
  std::vector<Parameter> parameters();
  std::vector<Variable<float>> trainable_variables() const;
  /// Learnable tensors plus BN running statistics, with their names.
  std::vector<std::pair<std::string, Tensorf>> state() const;
  /// Replaces tensors by name; throws FormatError on unknown names or shapes.
  void load_state(const std::vector<std::pair<std::string, Tensorf>>& tensors);

  Index input_channels() const;
  Index output_channels() const;
  /// Products of pooling strides and of upsampling factors.
  Index downsampling() const;
  Index upsampling() const;
  std::vector<std::string> tap_names() const;
  /// FNV-1a over every state tensor's bytes.
  std::uint64_t fingerprint() const;

 private:
  struct LayerState {
    Variable<float> weight;
    Variable<float> bias;
    AffineParams<float> affine;
    PopulationStats<float> population;
  };

  // `update` receives BN running-stat updates; null means inference.
  Variable<float> run(const Variable<float>& x, float eps, FeatureMaps<float>* taps,
                      const std::string& stop_after, std::vector<LayerState>* update) const;
  void validate() const;

  std::string prefix_;
  std::vector<LayerSpec> layers_;
  std::vector<LayerState> state_;
};

/// Fixed feature extractor f with named taps; the final tap feeds AdaIN.
class Encoder {
 public:
  Encoder(std::vector<LayerSpec> layers, Preprocess preprocess);

  const Sequential& network() const { return net_; }
  Sequential& mutable_network() { return net_; }
  const Preprocess& preprocess() const { return preprocess_; }

  /// Activations at every tap for (N, 3, H, W) images in [0, 1]; gradients flow
  /// to the input when it requires them. Parameters never do.
  FeatureMaps<float> forward(const Variable<float>& images) const;
  /// Final tap only.
  Variable<float> features(const Variable<float>& images) const;

  Index output_channels() const { return net_.output_channels(); }
  Index downsampling() const { return net_.downsampling(); }
  Index min_input_size() const { return 2 * downsampling(); }
  std::vector<std::string> tap_names() const { return net_.tap_names(); }
  const std::string& last_tap() const { return last_tap_; }
  std::uint64_t fingerprint() const { return net_.fingerprint(); }

 private:
  void check_input(const Shape& s) const;

  Sequential net_;
  Preprocess preprocess_;
  Variable<float> pre_weight_;
  Variable<float> pre_bias_;
  std::string last_tap_;
};

std::vector<LayerSpec> tiny_encoder_layers();
std::vector<LayerSpec> reference_encoder_layers();
std::vector<LayerSpec> tiny_decoder_layers(Index input_channels, NormKind norm = NormKind::None);
std::vector<LayerSpec> reference_decoder_layers(Index input_channels, NormKind norm = NormKind::None);

Preprocess tiny_preprocess();

/// Randomly initialized, frozen encoders.
std::shared_ptr<const Encoder> make_tiny_encoder(std::uint64_t seed = 0);
std::shared_ptr<const Encoder> make_reference_encoder(std::uint64_t seed = 0);

/// How encoder features of content and style become decoder input.
enum class Fusion { AdaIN, Concat, None };

const char* to_string(Fusion fusion);
Fusion parse_fusion(const std::string& name);

/// Encoder f, decoder g and the AdaIN epsilon: T(c, s) = g(AdaIN(f(c), f(s))).
class StyleTransferModel {
 public:
  StyleTransferModel(std::shared_ptr<const Encoder> encoder, Sequential decoder,
                     Fusion fusion = Fusion::AdaIN, float eps = static_cast<float>(kDefaultEps));

  const Encoder& encoder() const { return *encoder_; }
  std::shared_ptr<const Encoder> shared_encoder() const { return encoder_; }
  const Sequential& decoder() const { return decoder_; }
  Sequential& decoder() { return decoder_; }
  Fusion fusion() const { return fusion_; }
  float eps() const { return eps_; }

  FeatureMaps<float> encode(const Tensorf& images) const;
  /// Final-tap features f(x).
  Tensorf features(const Tensorf& images) const;
  /// Raw decoder output (unclamped).
  Tensorf decode(const Tensorf& t) const;
  /// Decoder input from content and style features per the fusion rule.
  Tensorf fuse(const Tensorf& content_features, const Tensorf& style_features) const;

  Tensorf transfer(const Image& content, const Image& style) const;
  StyleDescriptor encode_style(const Image& style) const;
  Tensorf transfer(const Image& content, const StyleDescriptor& style) const;
  /// decode(f(c)): the alpha = 0 reconstruction.
  Tensorf reconstruct(const Image& content) const;

 private:
  std::shared_ptr<const Encoder> encoder_;
  Sequential decoder_;
  Fusion fusion_;
  float eps_;
};

/// Tiny encoder plus a fresh decoder of matching width.
StyleTransferModel make_tiny_model(std::uint64_t seed = 0, NormKind norm = NormKind::None,
                                   Fusion fusion = Fusion::AdaIN);
StyleTransferModel make_reference_model(std::uint64_t seed = 0);

/// Decoder for `encoder` with the given norm and fusion; tiny or reference tables
/// picked by the encoder's output width.
Sequential make_decoder(const Encoder& encoder, NormKind norm, Fusion fusion, std::uint64_t seed);

}  // namespace adain
