#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "adain/image.hpp"
#include "adain/loss.hpp"
#include "adain/model.hpp"

namespace adain {

enum class Variant { AdaINDec, ConcatDec, AdaINBNDec, AdaININDec };

/// "adain-dec", "concat-dec", "adain-bndec", "adain-indec".
const char* to_string(Variant variant);
Variant parse_variant(const std::string& name);
Fusion variant_fusion(Variant variant);
NormKind variant_norm(Variant variant);

struct TrainConfig {
  std::filesystem::path content_dir;
  std::filesystem::path style_dir;
  int batch_size = 8;
  int resize_target = 512;
  int crop = 256;
  int iterations = 1000;
  double lambda = 10.0;
  std::uint64_t seed = 0;
  /// "tiny", "reference" or a weights bundle path.
  std::string encoder = "tiny";
  std::uint64_t encoder_seed = 0;
  Variant variant = Variant::AdaINDec;
  double eps = 1e-5;
  double learning_rate = 1e-4;

  /// Tiny encoder, 64x64 crops from images resized to 80, batch 4, 500 iterations.
  static TrainConfig desk();

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  nlohmann::json to_json() const;
  /// Starts from `base` and overrides the keys present; unknown keys are a ConfigError.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base = desk());
};

/// Input preprocessing for the single-style normalization experiment.
enum class InputPrep { None, ContrastEq, StyleNorm };

const char* to_string(InputPrep prep);
InputPrep parse_input_prep(const std::string& name);

struct ExperimentConfig {
  /// content_dir, batch, crop, iterations, lambda, learning rate and encoder.
  TrainConfig train = TrainConfig::desk();
  NormKind norm_kind = NormKind::Instance;
  InputPrep preprocess = InputPrep::None;
  std::filesystem::path style_image;
  /// Transfer model applied by StyleNorm, and the style it normalizes towards.
  std::optional<std::filesystem::path> style_norm_model;
  std::optional<std::filesystem::path> style_norm_style;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  void validate() const;
};

struct CurvePoint {
  long iteration = 0;
  LossReport report;
};

/// Loss reports at strictly increasing iterations.
class Curve {
 public:
  Curve() = default;
  explicit Curve(std::vector<std::string> layer_names) : layers_(std::move(layer_names)) {}

  /// Throws ContractError unless `iteration` exceeds the last recorded one.
  void append(long iteration, LossReport report);

  const std::vector<CurvePoint>& points() const { return points_; }
  const std::vector<std::string>& layer_names() const { return layers_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const CurvePoint& back() const { return points_.back(); }

  /// Mean report over points with first <= iteration <= last.
  LossReport window_mean(long first, long last) const;
  /// Mean over the last ceil(fraction * size) points; the "final" loss.
  LossReport tail_mean(double fraction = 0.1) const;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> layers_;
  std::vector<CurvePoint> points_;
};

/// Images of a directory, each resized so its smallest side is `resize_target`
/// (kept as is when it is 0) and then passed through `transform` (if any). Undecodable files are skipped
/// with a warning on stderr.
class ImageDataset {
 public:
  using Transform = std::function<Image(const Image&)>;

  static ImageDataset load(const std::filesystem::path& dir, int resize_target,
                           const Transform& transform = {}, const std::string& field = "dir");
  static ImageDataset from_images(std::vector<Image> images);

  const std::vector<Image>& images() const { return images_; }
  const std::vector<std::filesystem::path>& files() const { return files_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t size() const { return images_.size(); }

 private:
  std::vector<Image> images_;
  std::vector<std::filesystem::path> files_;
  std::vector<std::string> warnings_;
};

/// Stacks (1, C, H, W) tensors of equal shape into (N, C, H, W).
Tensorf stack_batch(const std::vector<Tensorf>& items);

/// `batch` random crops of size `crop`, images drawn with replacement.
Tensorf sample_crops(const ImageDataset& data, int batch, int crop, std::mt19937_64& rng);

/// Content and style batches, sampled independently with replacement.
std::pair<Tensorf, Tensorf> make_batch(const ImageDataset& content, const ImageDataset& style,
                                       const TrainConfig& cfg, std::mt19937_64& rng);

struct TrainResult {
  StyleTransferModel model;
  Curve curve;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

/// Trains the decoder of the configured variant. Content target is the AdaIN
/// output t (f(c) for Concat-Dec); only decoder parameters are updated.
TrainResult train_decoder(const TrainConfig& cfg, const ProgressFn& progress = {});
TrainResult train_decoder(const TrainConfig& cfg, std::shared_ptr<const Encoder> encoder,
                          const ImageDataset& content, const ImageDataset& style,
                          const ProgressFn& progress = {});
/// Same loop; `cfg.variant` picks the fusion and decoder norm.
TrainResult train_baseline(const TrainConfig& cfg, const ProgressFn& progress = {});

/// `img` stylized towards `style`, clamped and resized back to the input size.
Image style_normalize(const StyleTransferModel& model, const Image& img, const StyleDescriptor& style);

/// Content dataset for a single-style run with the configured preprocessing.
ImageDataset load_experiment_content(const ExperimentConfig& cfg);

/// Trains a decoder with per-conv IN or BN on f(c) against one fixed style.
/// The returned curve carries content, style and total losses per iteration.
Curve train_single_style(const ExperimentConfig& cfg, std::uint64_t seed,
                         const ProgressFn& progress = {});
Curve train_single_style(const ExperimentConfig& cfg, std::uint64_t seed,
                         std::shared_ptr<const Encoder> encoder, const ImageDataset& content,
                         const Image& style, const ProgressFn& progress = {});

struct EvalRow {
  std::size_t content_index = 0;
  std::size_t style_index = 0;
  LossReport report;
};

struct EvalResult {
  std::vector<std::string> layer_names;
  LossReport mean;
  std::vector<EvalRow> rows;

  std::string to_csv() const;
};

/// Content loss of `output` against decoder-input `target` plus style loss
/// against `style_taps` (the encoder taps of the style image).
LossReport score(const StyleTransferModel& model, const Image& output, const Tensorf& target,
                 const FeatureMaps<float>& style_taps, double lambda = 10.0);

/// Stylizes every (content, style) pair (outputs clamped to [0, 1]) and scores
/// content loss against the decoder input target and style loss against the style.
EvalResult evaluate(const StyleTransferModel& model, const std::vector<Image>& contents,
                    const std::vector<Image>& styles, double lambda = 10.0);
/// Same scoring with the unstylized content image standing in for the output.
EvalResult evaluate_raw_content(const StyleTransferModel& model, const std::vector<Image>& contents,
                                const std::vector<Image>& styles, double lambda = 10.0);

struct OptimizeResult {
  Image image;
  Curve curve;
};

/// Adam on pixel values starting from the content image; content target f(c)
/// at the final tap. Curve point i is the loss before update i.
OptimizeResult optimize_image(const Encoder& encoder, const Image& content, const Image& style,
                              int iterations, double lambda, double step, float eps = 1e-5f);

}  // namespace adain
