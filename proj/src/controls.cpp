#include "adain/controls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "adain/ops.hpp"

namespace adain {

StyleSource StyleSource::from_image(Image img) {
  StyleSource s;
  s.image = std::move(img);
  return s;
}

StyleSource StyleSource::from_descriptor(StyleDescriptor d) {
  StyleSource s;
  s.descriptor = std::move(d);
  return s;
}

void validate_controls(const ControlSpec& spec, std::size_t style_count) {
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
    throw ConfigError("alpha", "alpha must lie in [0, 1], got " + std::to_string(spec.alpha));
  }
  if (style_count == 0) throw ConfigError("styles", "at least one style is required");
  if (!spec.weights.empty()) {
    if (spec.weights.size() != style_count) {
      throw ConfigError("weights", "got " + std::to_string(spec.weights.size()) + " weights for " +
                                       std::to_string(style_count) + " styles");
    }
    double total = 0;
    for (double w : spec.weights) {
      if (!std::isfinite(w) || w < 0) throw ConfigError("weights", "weights must be finite and >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
      std::ostringstream msg;
      msg << "weights must sum to 1, got sum " << total;
      throw ConfigError("weights", msg.str());
    }
  }
  if (!spec.masks.empty() && spec.masks.size() != style_count) {
    throw ConfigError("masks", "got " + std::to_string(spec.masks.size()) + " masks for " +
                                   std::to_string(style_count) + " styles");
  }
}

std::vector<double> resolved_weights(const ControlSpec& spec, std::size_t style_count) {
  if (!spec.weights.empty()) return spec.weights;
  return std::vector<double>(style_count, 1.0 / static_cast<double>(style_count));
}

Tensorf blend_features(const Tensorf& content, const Tensorf& stylized, double alpha) {
  if (content.shape() != stylized.shape()) {
    throw DimensionError("blend of " + content.shape().str() + " and " + stylized.shape().str());
  }
  if (alpha == 0.0) return content;
  if (alpha == 1.0) return stylized;
  const auto a = static_cast<float>(alpha);
  return Tensorf(content.shape(), (1.f - a) * content.array() + a * stylized.array());
}

namespace {

void check_descriptor(const StyleDescriptor& d, Index channels) {
  if (d.channels() != channels) {
    throw ConfigError("styles", "style descriptor has " + std::to_string(d.channels()) +
                                    " channels, the encoder produces " + std::to_string(channels));
  }
}

Tensorf adain_term(const Tensorf& fc, const StyleDescriptor& d, float eps) {
  check_descriptor(d, fc.shape().c);
  NoGradGuard guard;
  return adain_with_stats(Variable<float>(fc), d, eps).value();
}

}  // namespace

Tensorf mix_features(const Tensorf& fc, const std::vector<StyleDescriptor>& styles,
                     const std::vector<double>& weights, float eps) {
  if (styles.empty() || styles.size() != weights.size()) {
    throw ConfigError("weights", "need one weight per style");
  }
  std::vector<std::string> keys;
  for (const auto& s : styles) keys.push_back(s.to_bytes());
  std::vector<std::size_t> order(styles.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : weights[a] < weights[b];
  });
  Tensorf acc(fc.shape());
  for (std::size_t k : order) {
    acc.array() += static_cast<float>(weights[k]) * adain_term(fc, styles[k], eps).array();
  }
  return acc;
}

Eigen::Array<bool, Eigen::Dynamic, 1> feature_mask(const Tensorf& mask, Index h, Index w) {
  const auto& s = mask.shape();
  if (s.n != 1 || s.c != 1) throw ConfigError("masks", "masks must be single-channel, got " + s.str());
  Eigen::Array<bool, Eigen::Dynamic, 1> out(h * w);
  for (Index i = 0; i < h; ++i) {
    const auto y = std::min(s.h - 1, static_cast<Index>((static_cast<double>(i) + 0.5) * s.h / h));
    for (Index j = 0; j < w; ++j) {
      const auto x = std::min(s.w - 1, static_cast<Index>((static_cast<double>(j) + 0.5) * s.w / w));
      out[i * w + j] = mask(0, 0, y, x) >= 0.5f;
    }
  }
  return out;
}

Tensorf spatial_features(const Tensorf& fc, const std::vector<StyleDescriptor>& styles,
                         const std::vector<Tensorf>& masks, Index image_height, Index image_width,
                         float eps) {
  if (styles.size() != masks.size() || styles.empty()) {
    throw ConfigError("masks", "spatial control needs one mask per style");
  }
  const Index h = fc.shape().h;
  const Index w = fc.shape().w;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> regions;
  for (const auto& m : masks) {
    if (m.shape().h != image_height || m.shape().w != image_width) {
      throw ConfigError("masks", "mask " + m.shape().str() + " does not match the content size " +
                                     std::to_string(image_height) + "x" + std::to_string(image_width));
    }
    regions.push_back(feature_mask(m, h, w));
  }
  Eigen::ArrayXi cover = Eigen::ArrayXi::Zero(h * w);
  for (const auto& r : regions) cover += r.cast<int>();
  const long overlapping = (cover > 1).count();
  if (overlapping > 0) {
    throw RegionOverlapError(overlapping, "masks overlap at " + std::to_string(overlapping) +
                                              " feature positions");
  }

  Tensorf out = fc;
  for (std::size_t k = 0; k < styles.size(); ++k) {
    if (!regions[k].any()) continue;
    const auto term = adain_term(fc, styles[k], eps);
    for (Index c = 0; c < fc.shape().c; ++c) {
      auto dst = out.plane(0, c);
      const auto src = term.plane(0, c);
      for (Index p = 0; p < h * w; ++p)
        if (regions[k][p]) dst[p] = src[p];
    }
  }
  return out;
}

namespace {

void require_adain(const StyleTransferModel& model) {
  if (model.fusion() != Fusion::AdaIN) throw ConfigError("fusion", "controls need an AdaIN model");
}

}  // namespace

Tensorf tradeoff(const StyleTransferModel& model, const Image& content, const Image& style, double alpha) {
  ControlSpec spec;
  spec.alpha = alpha;
  validate_controls(spec, 1);
  require_adain(model);
  const auto fc = model.features(content);
  return model.decode(blend_features(fc, model.fuse(fc, model.features(style)), alpha));
}

Tensorf interpolate_styles(const StyleTransferModel& model, const Image& content,
                           const std::vector<StyleDescriptor>& styles, const std::vector<double>& weights) {
  ControlSpec spec;
  spec.weights = weights;
  validate_controls(spec, styles.size());
  require_adain(model);
  return model.decode(mix_features(model.features(content), styles, weights, model.eps()));
}

Tensorf interpolate_styles(const StyleTransferModel& model, const Image& content,
                           const std::vector<Image>& styles, const std::vector<double>& weights) {
  std::vector<StyleDescriptor> descriptors;
  for (const auto& s : styles) descriptors.push_back(model.encode_style(s));
  return interpolate_styles(model, content, descriptors, weights);
}

Tensorf color_preserving_transfer(const StyleTransferModel& model, const Image& content, const Image& style) {
  return model.transfer(content, color_match(style, content));
}

Tensorf spatial_transfer(const StyleTransferModel& model, const Image& content,
                         const std::vector<StyleDescriptor>& styles, const std::vector<Tensorf>& masks) {
  ControlSpec spec;
  spec.masks = masks;
  validate_controls(spec, styles.size());
  require_adain(model);
  check_image(content);
  return model.decode(spatial_features(model.features(content), styles, masks, content.shape().h,
                                       content.shape().w, model.eps()));
}

Tensorf decoder_input(const StyleTransferModel& model, const Image& content,
                      const std::vector<StyleSource>& styles, const ControlSpec& spec) {
  validate_controls(spec, styles.size());
  require_adain(model);
  check_image(content);
  std::vector<StyleDescriptor> descriptors;
  for (const auto& s : styles) {
    if (s.descriptor && !spec.preserve_color) {
      descriptors.push_back(*s.descriptor);
    } else if (s.image) {
      descriptors.push_back(model.encode_style(spec.preserve_color ? color_match(*s.image, content) : *s.image));
    } else if (s.descriptor) {
      throw ConfigError("preserve_color", "color preservation needs style images, not cached statistics");
    } else {
      throw ConfigError("styles", "empty style source");
    }
  }
  const auto fc = model.features(content);
  const auto t = spec.masks.empty()
                     ? mix_features(fc, descriptors, resolved_weights(spec, styles.size()), model.eps())
                     : spatial_features(fc, descriptors, spec.masks, content.shape().h,
                                        content.shape().w, model.eps());
  return blend_features(fc, t, spec.alpha);
}

Tensorf stylize(const StyleTransferModel& model, const Image& content,
                const std::vector<StyleSource>& styles, const ControlSpec& spec) {
  return model.decode(decoder_input(model, content, styles, spec));
}

}  // namespace adain
