#pragma once

#include <optional>
#include <vector>

#include "adain/model.hpp"

namespace adain {

/// A style given as an image, as precomputed statistics, or both. With both,
/// the statistics are used unless colour preservation needs the image.
struct StyleSource {
  std::optional<Image> image;
  std::optional<StyleDescriptor> descriptor;

  static StyleSource from_image(Image img);
  static StyleSource from_descriptor(StyleDescriptor d);
};

/// Runtime knobs. Empty weights mean uniform; masks, when given, pair 1:1 with styles.
struct ControlSpec {
  double alpha = 1.0;
  std::vector<double> weights;
  std::vector<Tensorf> masks;
  bool preserve_color = false;
};

inline constexpr double kWeightSumTolerance = 1e-6;

/// Throws ConfigError naming "alpha", "weights", "styles" or "masks".
void validate_controls(const ControlSpec& spec, std::size_t style_count);
std::vector<double> resolved_weights(const ControlSpec& spec, std::size_t style_count);

/// (1 - alpha) * content + alpha * stylized; alpha = 0 and 1 return the inputs unchanged.
Tensorf blend_features(const Tensorf& content, const Tensorf& stylized, double alpha);

/// Sum of w_k * AdaIN(f, style_k), accumulated in a canonical order independent of
/// how the (style, weight) pairs are listed.
Tensorf mix_features(const Tensorf& content_features, const std::vector<StyleDescriptor>& styles,
                     const std::vector<double>& weights, float eps);

/// Mask (1, 1, H, W) resampled by nearest neighbour at cell centres to (h, w)
/// and binarized at 0.5.
Eigen::Array<bool, Eigen::Dynamic, 1> feature_mask(const Tensorf& mask, Index h, Index w);

/// Region k of the feature map takes AdaIN with style k, computed against the
/// full-map content statistics; uncovered positions keep the content features.
/// Overlapping regions throw RegionOverlapError.
Tensorf spatial_features(const Tensorf& content_features, const std::vector<StyleDescriptor>& styles,
                         const std::vector<Tensorf>& masks, Index image_height, Index image_width,
                         float eps);

Tensorf tradeoff(const StyleTransferModel& model, const Image& content, const Image& style, double alpha);
Tensorf interpolate_styles(const StyleTransferModel& model, const Image& content,
                           const std::vector<StyleDescriptor>& styles, const std::vector<double>& weights);
Tensorf interpolate_styles(const StyleTransferModel& model, const Image& content,
                           const std::vector<Image>& styles, const std::vector<double>& weights);
Tensorf color_preserving_transfer(const StyleTransferModel& model, const Image& content, const Image& style);
Tensorf spatial_transfer(const StyleTransferModel& model, const Image& content,
                         const std::vector<StyleDescriptor>& styles, const std::vector<Tensorf>& masks);

/// The decoder input the dispatcher below decodes.
Tensorf decoder_input(const StyleTransferModel& model, const Image& content,
                      const std::vector<StyleSource>& styles, const ControlSpec& spec);

/// Full dispatcher: color matching (image styles only), interpolation or spatial
/// regions, then the content/style trade-off, then one decode.
Tensorf stylize(const StyleTransferModel& model, const Image& content,
                const std::vector<StyleSource>& styles, const ControlSpec& spec);

}  // namespace adain
