#include "adain/image.hpp"

#include <Eigen/Eigenvalues>

#include <png.h>
// jpeglib.h needs size_t and FILE declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace adain {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("directory does not exist: " + parent.string());
  }
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

Image from_interleaved(const unsigned char* px, Index height, Index width, int stride_channels) {
  Image img({1, 3, height, width});
  const Index plane = height * width;
  for (Index i = 0; i < plane; ++i)
    for (Index c = 0; c < 3; ++c)
      img.data()[c * plane + i] = static_cast<float>(px[i * stride_channels + c]) / 255.f;
  return img;
}

std::vector<unsigned char> to_interleaved(const Image& img) {
  check_image(img);
  const Index plane = img.shape().plane();
  std::vector<unsigned char> px(static_cast<std::size_t>(plane * 3));
  for (Index i = 0; i < plane; ++i)
    for (Index c = 0; c < 3; ++c) {
      const float v = std::clamp(img.data()[c * plane + i], 0.f, 1.f);
      px[static_cast<std::size_t>(i * 3 + c)] =
          static_cast<unsigned char>(std::floor(v * 255.f + 0.5f));
    }
  return px;
}

bool is_png(std::string_view b) {
  return b.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(b.data()), 0, 8) == 0;
}

bool is_jpeg(std::string_view b) {
  return b.size() >= 3 && static_cast<unsigned char>(b[0]) == 0xFF &&
         static_cast<unsigned char>(b[1]) == 0xD8 && static_cast<unsigned char>(b[2]) == 0xFF;
}

Image decode_png(std::string_view bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw IoError("png has zero size");
  }
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png decode failed: " + msg);
  }
  return from_interleaved(px.data(), image.height, image.width, 4);
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Plain-data decode step so longjmp never skips a destructor.
bool jpeg_decode_raw(const unsigned char* data, unsigned long size, std::vector<unsigned char>& px,
                     unsigned& width, unsigned& height, JpegError& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, size);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  px.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Image decode_jpeg(std::string_view bytes) {
  std::vector<unsigned char> px;
  unsigned width = 0;
  unsigned height = 0;
  JpegError err{};
  if (!jpeg_decode_raw(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), px,
                       width, height, err)) {
    throw IoError(std::string("jpeg decode failed: ") + err.message);
  }
  if (width == 0 || height == 0) throw IoError("jpeg has zero size");
  return from_interleaved(px.data(), height, width, 3);
}

bool jpeg_encode_raw(const unsigned char* px, unsigned width, unsigned height, int quality,
                     unsigned char** out, unsigned long* out_size, JpegError& err) {
  jpeg_compress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, out, out_size);
  cinfo.image_width = width;
  cinfo.image_height = height;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto row = const_cast<JSAMPROW>(px + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

}  // namespace

void check_image(const Image& img) {
  const auto& s = img.shape();
  if (s.n != 1 || s.c != 3 || s.h < 1 || s.w < 1) {
    throw DimensionError("image must be (1, 3, H, W) with H, W >= 1, got " + s.str());
  }
}

Image decode_image(std::string_view bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw IoError("unrecognized image format (expected PNG or JPEG)");
}

Image load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string encode_png(const Image& img) {
  const auto px = to_interleaved(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.shape().w);
  image.height = static_cast<png_uint_32>(img.shape().h);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::string encode_jpeg(const Image& img, int quality) {
  const auto px = to_interleaved(img);
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  JpegError err{};
  const bool ok = jpeg_encode_raw(px.data(), static_cast<unsigned>(img.shape().w),
                                  static_cast<unsigned>(img.shape().h), quality, &buf, &size, err);
  std::string out;
  if (ok) out.assign(reinterpret_cast<const char*>(buf), size);
  std::free(buf);
  if (!ok) throw IoError(std::string("jpeg encode failed: ") + err.message);
  return out;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  write_file(path, ext == ".jpg" || ext == ".jpeg" ? encode_jpeg(img) : encode_png(img));
}

Tensorf clamp_unit(const Tensorf& img) {
  return Tensorf(img.shape(), img.array().max(0.f).min(1.f));
}

Tensorf luminance(const Image& img) {
  check_image(img);
  Tensorf y({1, 1, img.shape().h, img.shape().w});
  const auto r = img.plane(0, 0);
  const auto g = img.plane(0, 1);
  const auto b = img.plane(0, 2);
  for (Index i = 0; i < y.size(); ++i) {
    y.data()[i] = static_cast<float>(kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i]);
  }
  return y;
}

Tensorf decode_mask(std::string_view bytes) { return luminance(decode_image(bytes)); }

Tensorf load_mask(const std::filesystem::path& path) { return luminance(load_image(path)); }

Tensorf resize_bilinear(const Tensorf& img, Index height, Index width) {
  const auto& s = img.shape();
  if (s.h < 1 || s.w < 1) throw DimensionError("cannot resize an empty image " + s.str());
  if (height < 1 || width < 1) throw DimensionError("resize target must be at least 1x1");
  if (height == s.h && width == s.w) return img;

  struct Tap {
    Index i0, i1;
    double frac;
  };
  auto taps = [](Index in, Index out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (Index o = 0; o < out; ++o) {
      const double src = std::max(0.0, (static_cast<double>(o) + 0.5) * scale - 0.5);
      const Index i0 = std::min(static_cast<Index>(src), in - 1);
      t[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(s.h, height);
  const auto tx = taps(s.w, width);

  Tensorf out({s.n, s.c, height, width});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const auto src = img.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < height; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        for (Index x = 0; x < width; ++x) {
          const auto& b = tx[static_cast<std::size_t>(x)];
          const double top = src[a.i0 * s.w + b.i0] * (1 - b.frac) + src[a.i0 * s.w + b.i1] * b.frac;
          const double bot = src[a.i1 * s.w + b.i0] * (1 - b.frac) + src[a.i1 * s.w + b.i1] * b.frac;
          dst[y * width + x] = static_cast<float>(top * (1 - a.frac) + bot * a.frac);
        }
      }
    }
  return out;
}

Image resize_smallest_side(const Image& img, Index target) {
  check_image(img);
  if (target < 1) throw ConfigError("target", "resize target must be >= 1");
  const Index h = img.shape().h;
  const Index w = img.shape().w;
  const Index smallest = std::min(h, w);
  auto scaled = [&](Index side) {
    return static_cast<Index>(std::llround(static_cast<double>(side) * target / smallest));
  };
  return resize_bilinear(img, h == smallest ? target : scaled(h), h == smallest ? scaled(w) : target);
}

CropWindow random_crop_window(Index height, Index width, Index size, std::uint64_t seed) {
  if (size < 1 || height < size || width < size) {
    throw DimensionError("crop " + std::to_string(size) + " does not fit " + std::to_string(height) +
                         "x" + std::to_string(width));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> dy(0, height - size);
  std::uniform_int_distribution<Index> dx(0, width - size);
  CropWindow win;
  win.top = dy(rng);
  win.left = dx(rng);
  return win;
}

Image crop(const Image& img, CropWindow window, Index size) {
  const auto& s = img.shape();
  if (window.top < 0 || window.left < 0 || window.top + size > s.h || window.left + size > s.w) {
    throw DimensionError("crop window outside image " + s.str());
  }
  Image out({s.n, s.c, size, size});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index y = 0; y < size; ++y)
        for (Index x = 0; x < size; ++x)
          out(n, c, y, x) = img(n, c, window.top + y, window.left + x);
  return out;
}

Image random_crop(const Image& img, Index size, std::uint64_t seed) {
  check_image(img);
  return crop(img, random_crop_window(img.shape().h, img.shape().w, size, seed), size);
}

Image equalize_luminance(const Image& img) {
  check_image(img);
  const Index count = img.shape().plane();
  const auto r = img.plane(0, 0);
  const auto g = img.plane(0, 1);
  const auto b = img.plane(0, 2);

  std::vector<double> y(static_cast<std::size_t>(count));
  std::vector<int> bin(static_cast<std::size_t>(count));
  std::array<long, 256> hist{};
  for (Index i = 0; i < count; ++i) {
    const double v = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    const int k = std::clamp(static_cast<int>(std::floor(v * 256.0)), 0, 255);
    y[static_cast<std::size_t>(i)] = v;
    bin[static_cast<std::size_t>(i)] = k;
    ++hist[static_cast<std::size_t>(k)];
  }
  std::array<double, 256> cdf{};
  long running = 0;
  for (int k = 0; k < 256; ++k) {
    running += hist[static_cast<std::size_t>(k)];
    cdf[static_cast<std::size_t>(k)] = static_cast<double>(running) / static_cast<double>(count);
  }

  Image out(img.shape());
  auto ro = out.plane(0, 0);
  auto go = out.plane(0, 1);
  auto bo = out.plane(0, 2);
  for (Index i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double cb = -0.168736 * r[i] - 0.331264 * g[i] + 0.5 * b[i];
    const double cr = 0.5 * r[i] - 0.418688 * g[i] - 0.081312 * b[i];
    const double ye = cdf[static_cast<std::size_t>(bin[u])];
    ro[i] = static_cast<float>(std::clamp(ye + 1.402 * cr, 0.0, 1.0));
    go[i] = static_cast<float>(std::clamp(ye - 0.344136 * cb - 0.714136 * cr, 0.0, 1.0));
    bo[i] = static_cast<float>(std::clamp(ye + 1.772 * cb, 0.0, 1.0));
  }
  return out;
}

namespace {

Eigen::Matrix<double, 3, Eigen::Dynamic> pixels(const Image& img) {
  check_image(img);
  return img.sample_matrix(0).cast<double>();
}

struct Moments {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

Moments moments(const Eigen::Matrix<double, 3, Eigen::Dynamic>& p) {
  Moments m;
  m.mean = p.rowwise().mean();
  const Eigen::Matrix<double, 3, Eigen::Dynamic> centered = p.colwise() - m.mean;
  m.cov = centered * centered.transpose() / static_cast<double>(p.cols());
  return m;
}

// Smallest eigenvalue below this marks a covariance as singular.
constexpr double kSingularEigenvalue = 1e-8;
constexpr double kRegularizer = 1e-5;

Eigen::Matrix3d sym_power(const Eigen::Matrix3d& m, double power) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  const Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0).array().pow(power);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

ColorTransform fit_color_transform(const Image& style, const Image& content) {
  const auto s = moments(pixels(style));
  const auto c = moments(pixels(content));
  ColorTransform t;
  t.style_mean = s.mean;
  t.content_mean = c.mean;
  Eigen::Matrix3d cov_s = s.cov;
  Eigen::Matrix3d cov_c = c.cov;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov_s, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kSingularEigenvalue) {
    cov_s += kRegularizer * Eigen::Matrix3d::Identity();
    cov_c += kRegularizer * Eigen::Matrix3d::Identity();
    t.regularized = true;
  }
  t.matrix = sym_power(cov_c, 0.5) * sym_power(cov_s, -0.5);
  return t;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> apply_color_transform(const ColorTransform& t,
                                                               const Image& img) {
  const auto p = pixels(img);
  return (t.matrix * (p.colwise() - t.style_mean)).colwise() + t.content_mean;
}

Image color_match(const Image& style, const Image& content) {
  const auto t = fit_color_transform(style, content);
  const auto p = apply_color_transform(t, style);
  Image out(style.shape());
  out.sample_matrix(0) = p.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
  return out;
}

}  // namespace adain
