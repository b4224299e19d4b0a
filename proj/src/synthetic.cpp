#include "adain/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

namespace adain {

namespace {

using Color = std::array<float, 3>;

Color random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.f, 1.f);
  return {u(rng), u(rng), u(rng)};
}

void set(Image& img, Index y, Index x, const Color& c) {
  for (Index k = 0; k < 3; ++k) img(0, k, y, x) = c[static_cast<std::size_t>(k)];
}

Color mix(const Color& a, const Color& b, float t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

// Bilinearly interpolated lattice noise in [0, 1].
class ValueNoise {
 public:
  ValueNoise(std::mt19937_64& rng, int cells) : cells_(cells), grid_((cells + 1) * (cells + 1)) {
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (auto& g : grid_) g = u(rng);
  }
  float at(float fy, float fx) const {
    const float y = fy * cells_;
    const float x = fx * cells_;
    const int y0 = std::min(static_cast<int>(y), cells_ - 1);
    const int x0 = std::min(static_cast<int>(x), cells_ - 1);
    const float ty = y - y0;
    const float tx = x - x0;
    auto g = [&](int r, int c) { return grid_[static_cast<std::size_t>(r * (cells_ + 1) + c)]; };
    const float top = g(y0, x0) * (1 - tx) + g(y0, x0 + 1) * tx;
    const float bot = g(y0 + 1, x0) * (1 - tx) + g(y0 + 1, x0 + 1) * tx;
    return top * (1 - ty) + bot * ty;
  }

 private:
  int cells_;
  std::vector<float> grid_;
};

}  // namespace

Image synthetic_content(std::uint64_t seed, Index height, Index width) {
  std::mt19937_64 rng(seed * 2654435761u + 17);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Image img({1, 3, height, width});
  const Color a = random_color(rng);
  const Color b = random_color(rng);
  const float angle = u(rng) * 6.2831853f;
  const float dy = std::sin(angle);
  const float dx = std::cos(angle);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const float t = 0.5f + 0.5f * (dy * (2.f * y / height - 1.f) + dx * (2.f * x / width - 1.f)) / 1.4142f;
      set(img, y, x, mix(a, b, t));
    }

  const int shapes = 3 + static_cast<int>(rng() % 4);
  for (int s = 0; s < shapes; ++s) {
    const Color c = random_color(rng);
    const float cy = u(rng) * height;
    const float cx = u(rng) * width;
    const float r = (0.1f + 0.25f * u(rng)) * std::min(height, width);
    const int kind = static_cast<int>(rng() % 3);
    const float ry = r * (0.5f + u(rng));
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const float py = y + 0.5f - cy;
        const float px = x + 0.5f - cx;
        bool inside = false;
        if (kind == 0) {
          inside = py * py + px * px <= r * r;
        } else if (kind == 1) {
          inside = std::abs(px) <= r && std::abs(py) <= ry;
        } else {
          inside = py >= -r && py <= r && std::abs(px) <= (py + r) * 0.5f;
        }
        if (inside) set(img, y, x, c);
      }
  }
  return img;
}

Image synthetic_style(std::uint64_t seed, Index height, Index width) {
  std::mt19937_64 rng(seed * 2246822519u + 101);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  const int family = static_cast<int>(seed % 4);
  std::vector<Color> palette(2 + rng() % 3);
  for (auto& c : palette) c = random_color(rng);
  auto pick = [&](float t) {
    const float scaled = std::clamp(t, 0.f, 0.9999f) * static_cast<float>(palette.size() - 1);
    const auto i = static_cast<std::size_t>(scaled);
    return mix(palette[i], palette[std::min(i + 1, palette.size() - 1)], scaled - static_cast<float>(i));
  };

  Image img({1, 3, height, width});
  const float angle = u(rng) * 3.1415926f;
  const float freq = 3.f + 9.f * u(rng);
  const float cell = 4.f + 8.f * u(rng);
  ValueNoise noise(rng, 3 + static_cast<int>(rng() % 6));
  ValueNoise detail(rng, 12 + static_cast<int>(rng() % 12));
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const float fy = static_cast<float>(y) / height;
      const float fx = static_cast<float>(x) / width;
      Color c;
      switch (family) {
        case 0: {
          const float p = std::sin(6.2831853f * freq * (fy * std::sin(angle) + fx * std::cos(angle)));
          c = pick(0.5f + 0.5f * p);
          break;
        }
        case 1: {
          const int cy = static_cast<int>(std::floor(y / cell));
          const int cx = static_cast<int>(std::floor(x / cell));
          c = (cy + cx) % 2 == 0 ? palette.front() : palette.back();
          break;
        }
        case 2: {
          const float my = std::fmod(y + 0.5f, 2 * cell) - cell;
          const float mx = std::fmod(x + 0.5f, 2 * cell) - cell;
          c = my * my + mx * mx < 0.4f * cell * cell ? palette.back() : palette.front();
          break;
        }
        default:
          c = pick(0.7f * noise.at(fy, fx) + 0.3f * detail.at(fy, fx));
          break;
      }
      set(img, y, x, c);
    }
  return img;
}

void write_synthetic_set(const std::filesystem::path& dir, SyntheticKind kind, int count, Index size,
                         std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const char* prefix = kind == SyntheticKind::Content ? "content" : "style";
  for (int i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04d.png", prefix, i);
    const auto s = seed + static_cast<std::uint64_t>(i);
    save_image(kind == SyntheticKind::Content ? synthetic_content(s, size, size)
                                              : synthetic_style(s, size, size),
               dir / name);
  }
}

}  // namespace adain
