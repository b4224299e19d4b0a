#include <gtest/gtest.h>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "adain/image.hpp"
#include "support/gradcheck.hpp"

namespace adain {
namespace {

using testing::random_tensorf;

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "adain_image_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string png_bytes(const std::vector<unsigned char>& px, int w, int h, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = w;
  image.height = h;
  image.format = format;
  png_alloc_size_t size = 0;
  png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr);
  std::string out(size, '\0');
  EXPECT_TRUE(png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr));
  out.resize(size);
  return out;
}

Image gray_image(const std::vector<float>& values, Index h, Index w) {
  Image img({1, 3, h, w});
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < h * w; ++i) img.plane(0, c)[i] = values[static_cast<std::size_t>(i)];
  return img;
}

// Kolmogorov-Smirnov distance between the empirical distribution of `v` and U[0,1].
double ks_to_uniform(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, std::abs((i + 1) / n - x), std::abs(x - i / n)});
  }
  return d;
}

std::vector<double> luma_values(const Image& img) {
  const auto y = luminance(img);
  return {y.data(), y.data() + y.size()};
}

TEST(ImageIo, PngRoundTripWithinQuantization) {
  std::mt19937_64 rng(1);
  const Image img = random_tensorf({1, 3, 17, 23}, rng);
  const auto path = temp_dir() / "roundtrip.png";
  save_image(img, path);
  const Image back = load_image(path);
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_LE((back.array() - img.array()).abs().maxCoeff(), 0.5f / 255.f + 1e-6f);
}

TEST(ImageIo, BlackIsZeroAndWhiteIsOne) {
  const auto black = decode_image(png_bytes(std::vector<unsigned char>(4 * 4 * 3, 0), 4, 4, PNG_FORMAT_RGB));
  EXPECT_TRUE((black.array() == 0.f).all());
  const auto white = decode_image(png_bytes(std::vector<unsigned char>(2 * 3 * 3, 255), 3, 2, PNG_FORMAT_RGB));
  EXPECT_EQ(white.shape(), (Shape{1, 3, 2, 3}));
  EXPECT_TRUE((white.array() == 1.f).all());
}

TEST(ImageIo, GrayscaleReplicatedAndAlphaDropped) {
  const auto gray = decode_image(png_bytes({0, 51, 102, 255}, 2, 2, PNG_FORMAT_GRAY));
  for (Index c = 0; c < 3; ++c) {
    EXPECT_FLOAT_EQ(gray(0, c, 0, 1), 51.f / 255.f);
    EXPECT_FLOAT_EQ(gray(0, c, 1, 1), 1.f);
  }
  const auto rgba = decode_image(png_bytes({10, 20, 30, 0, 40, 50, 60, 128}, 2, 1, PNG_FORMAT_RGBA));
  EXPECT_FLOAT_EQ(rgba(0, 0, 0, 0), 10.f / 255.f);
  EXPECT_FLOAT_EQ(rgba(0, 2, 0, 1), 60.f / 255.f);
}

TEST(ImageIo, SaveClampsAndRoundsHalfUp) {
  Image img({1, 3, 1, 2});
  img.plane(0, 0) << -0.5f, 2.f;
  img.plane(0, 1) << 0.5f / 255.f, 1.49f / 255.f;
  img.plane(0, 2) << 0.4f / 255.f, 254.5f / 255.f;
  const auto back = decode_image(encode_png(img));
  EXPECT_EQ(back(0, 0, 0, 0), 0.f);
  EXPECT_EQ(back(0, 0, 0, 1), 1.f);
  EXPECT_FLOAT_EQ(back(0, 1, 0, 0) * 255.f, 1.f);
  EXPECT_FLOAT_EQ(back(0, 1, 0, 1) * 255.f, 1.f);
  EXPECT_EQ(back(0, 2, 0, 0), 0.f);
  EXPECT_EQ(back(0, 2, 0, 1), 1.f);
}

TEST(ImageIo, JpegRoundTrip) {
  const Image img = Image::constant({1, 3, 16, 16}, 0.5f);
  const auto path = temp_dir() / "flat.jpg";
  save_image(img, path);
  const Image back = load_image(path);
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_LE((back.array() - img.array()).abs().maxCoeff(), 2.f / 255.f);
}

TEST(ImageIo, Errors) {
  EXPECT_THROW(decode_image("not an image"), IoError);
  auto truncated = encode_png(Image::constant({1, 3, 8, 8}, 0.3f));
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_image(truncated), IoError);
  auto bad_jpeg = encode_jpeg(Image::constant({1, 3, 8, 8}, 0.3f));
  bad_jpeg.resize(20);
  EXPECT_THROW(decode_image(bad_jpeg), IoError);
  EXPECT_THROW(load_image(temp_dir() / "missing.png"), IoError);
  EXPECT_THROW(save_image(Image::constant({1, 3, 2, 2}, 0.f), temp_dir() / "no_dir" / "x.png"), IoError);
  EXPECT_THROW(encode_png(Tensorf({1, 1, 2, 2})), DimensionError);
}

TEST(ImageIo, MaskIsLuma) {
  const auto mask = decode_mask(png_bytes({0, 127, 128, 255}, 4, 1, PNG_FORMAT_GRAY));
  EXPECT_EQ(mask.shape(), (Shape{1, 1, 1, 4}));
  EXPECT_LT(mask(0, 0, 0, 1), 0.5f);
  EXPECT_GE(mask(0, 0, 0, 2), 0.5f);
  EXPECT_NEAR(mask(0, 0, 0, 3), 1.f, 1e-6);
}

// Bilinear with half-pixel centers written as a triangle-kernel sum.
float reference_bilinear(const Tensorf& img, Index c, Index y, Index x, Index oh, Index ow) {
  const Index h = img.shape().h;
  const Index w = img.shape().w;
  const double sy = std::clamp((y + 0.5) * h / oh - 0.5, 0.0, double(h - 1));
  const double sx = std::clamp((x + 0.5) * w / ow - 0.5, 0.0, double(w - 1));
  double acc = 0;
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j)
      acc += img(0, c, i, j) * std::max(0.0, 1 - std::abs(sy - i)) * std::max(0.0, 1 - std::abs(sx - j));
  return static_cast<float>(acc);
}

TEST(Resize, MatchesTriangleKernelReference) {
  std::mt19937_64 rng(2);
  const Image img = random_tensorf({1, 3, 7, 9}, rng);
  for (auto [oh, ow] : {std::pair<Index, Index>{13, 4}, {3, 17}, {7, 9}, {1, 1}}) {
    const auto out = resize_bilinear(img, oh, ow);
    ASSERT_EQ(out.shape(), (Shape{1, 3, oh, ow}));
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < oh; ++y)
        for (Index x = 0; x < ow; ++x)
          EXPECT_NEAR(out(0, c, y, x), reference_bilinear(img, c, y, x, oh, ow), 1e-6);
  }
}

TEST(Resize, HalvingAveragesBlocks) {
  std::mt19937_64 rng(3);
  const Image img = random_tensorf({1, 3, 8, 6}, rng);
  const auto out = resize_bilinear(img, 4, 3);
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 3; ++x) {
        const float avg = (img(0, c, 2 * y, 2 * x) + img(0, c, 2 * y + 1, 2 * x) +
                           img(0, c, 2 * y, 2 * x + 1) + img(0, c, 2 * y + 1, 2 * x + 1)) / 4;
        EXPECT_NEAR(out(0, c, y, x), avg, 1e-6);
      }
}

TEST(Resize, SmallestSideExamples) {
  const auto big = resize_smallest_side(Image::constant({1, 3, 768, 1024}, 0.25f), 512);
  EXPECT_EQ(big.shape(), (Shape{1, 3, 512, 683}));
  EXPECT_TRUE((big.array() == 0.25f).all());
  const auto tall = resize_smallest_side(Image::constant({1, 3, 40, 30}, 0.5f), 12);
  EXPECT_EQ(tall.shape(), (Shape{1, 3, 16, 12}));

  std::mt19937_64 rng(4);
  const Image square = random_tensorf({1, 3, 32, 32}, rng);
  EXPECT_EQ(resize_smallest_side(square, 32), square);
  EXPECT_THROW(resize_smallest_side(square, 0), ConfigError);
  EXPECT_THROW(resize_bilinear(Tensorf({1, 3, 0, 4}), 2, 2), DimensionError);
}

TEST(Crop, ExamplesAndDeterminism) {
  std::mt19937_64 rng(5);
  const Image exact = random_tensorf({1, 3, 16, 16}, rng);
  EXPECT_EQ(random_crop(exact, 16, 99), exact);

  const Image img = random_tensorf({1, 3, 40, 50}, rng);
  EXPECT_EQ(random_crop(img, 32, 7), random_crop(img, 32, 7));
  const auto win = random_crop_window(40, 50, 32, 7);
  const auto c = random_crop(img, 32, 7);
  EXPECT_EQ(c(0, 1, 3, 4), img(0, 1, win.top + 3, win.left + 4));

  Index max_top = 0;
  Index max_left = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto w = random_crop_window(300, 300, 256, seed);
    ASSERT_GE(w.top, 0);
    ASSERT_GE(w.left, 0);
    ASSERT_LE(w.top, 44);
    ASSERT_LE(w.left, 44);
    max_top = std::max(max_top, w.top);
    max_left = std::max(max_left, w.left);
  }
  EXPECT_EQ(max_top, 44);
  EXPECT_EQ(max_left, 44);
  EXPECT_THROW(random_crop(img, 41, 0), DimensionError);
}

TEST(Equalize, UniformRampBarelyMoves) {
  std::vector<float> ramp(256);
  for (int k = 0; k < 256; ++k) ramp[k] = k / 255.f;
  const auto img = gray_image(ramp, 16, 16);
  const auto out = equalize_luminance(img);
  EXPECT_LT((out.array() - img.array()).abs().maxCoeff(), 1.f / 128.f);
}

TEST(Equalize, ConstantAndTwoLevel) {
  const auto flat = equalize_luminance(Image::constant({1, 3, 5, 5}, 0.3f));
  EXPECT_TRUE((flat.array() == flat.array()[0]).all());

  std::vector<float> two(64);
  for (int i = 0; i < 64; ++i) two[i] = i < 32 ? 0.2f : 0.7f;
  const auto out = equalize_luminance(gray_image(two, 8, 8));
  EXPECT_NEAR(out(0, 0, 0, 0), 0.5f, 1e-5);
  EXPECT_NEAR(out(0, 2, 7, 7), 1.f, 1e-5);
}

TEST(Equalize, KeepsGrayGrayAndStaysInRange) {
  std::mt19937_64 rng(6);
  const Image img = random_tensorf({1, 3, 12, 12}, rng);
  const auto out = equalize_luminance(img);
  EXPECT_GE(out.array().minCoeff(), 0.f);
  EXPECT_LE(out.array().maxCoeff(), 1.f);

  std::vector<float> v(144);
  for (auto& x : v) x = std::uniform_real_distribution<float>(0.f, 1.f)(rng);
  const auto g = equalize_luminance(gray_image(v, 12, 12));
  EXPECT_LT((g.plane(0, 0) - g.plane(0, 1)).abs().maxCoeff(), 1e-5f);
  EXPECT_LT((g.plane(0, 0) - g.plane(0, 2)).abs().maxCoeff(), 1e-5f);
}

TEST(Equalize, ReducesKsDistanceOnSkewedImages) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    std::vector<float> v(32 * 32);
    const float power = 1.5f + static_cast<float>(seed);
    for (auto& x : v) x = std::pow(u(rng), power);
    const auto img = gray_image(v, 32, 32);
    EXPECT_LT(ks_to_uniform(luma_values(equalize_luminance(img))), ks_to_uniform(luma_values(img)))
        << "seed " << seed;
  }
}

TEST(ColorMatch, IdentityWhenStatisticsAlreadyMatch) {
  std::mt19937_64 rng(7);
  const Image content = random_tensorf({1, 3, 10, 10}, rng);
  EXPECT_LT((color_match(content, content).array() - content.array()).abs().maxCoeff(), 1e-5f);

  // A spatial permutation has the same mean and covariance.
  Image permuted = content;
  for (Index c = 0; c < 3; ++c) {
    auto p = permuted.plane(0, c);
    std::reverse(p.data(), p.data() + p.size());
  }
  EXPECT_LT((color_match(permuted, content).array() - permuted.array()).abs().maxCoeff(), 1e-5f);
}

TEST(ColorMatch, ConstantStyleBecomesContentMean) {
  std::mt19937_64 rng(8);
  const Image content = random_tensorf({1, 3, 9, 9}, rng);
  const auto t = fit_color_transform(Image::constant({1, 3, 6, 6}, 0.8f), content);
  EXPECT_TRUE(t.regularized);
  const auto out = color_match(Image::constant({1, 3, 6, 6}, 0.8f), content);
  for (Index c = 0; c < 3; ++c) {
    const double mean = content.plane(0, c).cast<double>().mean();
    EXPECT_NEAR(out.plane(0, c).minCoeff(), mean, 1e-6);
    EXPECT_NEAR(out.plane(0, c).maxCoeff(), mean, 1e-6);
  }
}

TEST(ColorMatch, GrayRampStyleTakesContentStatistics) {
  std::vector<float> ramp(64);
  for (int i = 0; i < 64; ++i) ramp[i] = i / 63.f;
  const auto style = gray_image(ramp, 8, 8);
  std::mt19937_64 rng(9);
  Image content = random_tensorf({1, 3, 12, 12}, rng);
  content.plane(0, 0) *= 0.5f;
  content.plane(0, 2) = content.plane(0, 2) * 0.3f + 0.6f;

  const auto t = fit_color_transform(style, content);
  const auto p = apply_color_transform(t, style);
  const Eigen::Vector3d out_mean = p.rowwise().mean();
  const Eigen::Matrix<double, 3, Eigen::Dynamic> cp = content.sample_matrix(0).cast<double>();
  const Eigen::Vector3d content_mean = cp.rowwise().mean();
  EXPECT_LT((out_mean - content_mean).cwiseAbs().maxCoeff(), 1e-6);

  const auto matched = color_match(style, content);
  EXPECT_GE(matched.array().minCoeff(), 0.f);
  EXPECT_LE(matched.array().maxCoeff(), 1.f);
}

TEST(ColorMatch, OutputCovarianceMatchesContent) {
  std::mt19937_64 rng(10);
  Image style = random_tensorf({1, 3, 16, 16}, rng);
  style.plane(0, 1) = style.plane(0, 0) * 0.5f + style.plane(0, 1) * 0.5f;
  const Image content = random_tensorf({1, 3, 16, 16}, rng);
  const auto p = apply_color_transform(fit_color_transform(style, content), style);
  auto cov = [](const Eigen::Matrix<double, 3, Eigen::Dynamic>& m) {
    const Eigen::Matrix<double, 3, Eigen::Dynamic> c = m.colwise() - m.rowwise().mean();
    return Eigen::Matrix3d(c * c.transpose() / double(m.cols()));
  };
  const Eigen::Matrix<double, 3, Eigen::Dynamic> cp = content.sample_matrix(0).cast<double>();
  EXPECT_LT((cov(p) - cov(cp)).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace
}  // namespace adain
