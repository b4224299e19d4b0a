#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "adain/tensor.hpp"

namespace adain {

/// RGB image as a (1, 3, H, W) float tensor with values in [0, 1].
using Image = Tensorf;

/// Throws DimensionError unless `img` is (1, 3, H, W) with H, W >= 1.
void check_image(const Image& img);

/// Decodes PNG or JPEG bytes (detected by signature). Grayscale is replicated,
/// alpha dropped. Throws IoError on anything undecodable.
Image decode_image(std::string_view bytes);
Image load_image(const std::filesystem::path& path);

/// Clamps to [0, 1] and quantizes with round-half-up to 8 bits.
std::string encode_png(const Image& img);
std::string encode_jpeg(const Image& img, int quality = 95);

/// Writes PNG, or JPEG for .jpg/.jpeg extensions.
void save_image(const Image& img, const std::filesystem::path& path);

/// Copy clamped to [0, 1].
Tensorf clamp_unit(const Tensorf& img);

/// Single-channel (1, 1, H, W) mask from an image file: BT.601 luma in [0, 1].
Tensorf decode_mask(std::string_view bytes);
Tensorf load_mask(const std::filesystem::path& path);

/// Bilinear resize with half-pixel centers; works for any channel count.
Tensorf resize_bilinear(const Tensorf& img, Index height, Index width);

/// Scales so the smaller side equals `target`, other side round(orig * target / smallest).
Image resize_smallest_side(const Image& img, Index target);

struct CropWindow {
  Index top = 0;
  Index left = 0;
};

/// Offsets drawn uniformly from [0, H - size] x [0, W - size].
CropWindow random_crop_window(Index height, Index width, Index size, std::uint64_t seed);
Image crop(const Image& img, CropWindow window, Index size);
Image random_crop(const Image& img, Index size, std::uint64_t seed);

/// BT.601 luma, (1, 1, H, W).
Tensorf luminance(const Image& img);

/// Histogram-equalizes Y in YCbCr (256 bins, Y' = cdf(bin) / count), keeps chroma,
/// converts back and clamps.
Image equalize_luminance(const Image& img);

/// s' = A (s - mu_s) + mu_c with A = Sigma_c^{1/2} Sigma_s^{-1/2}.
struct ColorTransform {
  Eigen::Matrix3d matrix;
  Eigen::Vector3d style_mean;
  Eigen::Vector3d content_mean;
  bool regularized = false;
};

ColorTransform fit_color_transform(const Image& style, const Image& content);

/// Transformed pixels as a 3 x HW matrix, in double and before clamping.
Eigen::Matrix<double, 3, Eigen::Dynamic> apply_color_transform(const ColorTransform& t,
                                                               const Image& img);

/// Recolors `style` to the content's mean and covariance; output clamped.
Image color_match(const Image& style, const Image& content);

}  // namespace adain
