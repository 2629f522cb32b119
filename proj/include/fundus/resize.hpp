#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fundus/image.hpp"

namespace fundus {

namespace detail {

inline double lanczos(double x, int a) noexcept {
  if (x == 0.0) return 1.0;
  if (std::abs(x) >= a) return 0.0;
  const double px = std::numbers::pi * x;
  return a * std::sin(px) * std::sin(px / a) / (px * px);
}

struct Tap {
  int first = 0;               // first source index (before clamping)
  std::vector<double> weights;  // normalized
};

// One weight row per destination sample. When shrinking, the kernel is
// stretched by the scale factor so it also acts as the anti-aliasing filter.
inline std::vector<Tap> lanczos_taps(int src, int dst, int a) {
  const double scale = static_cast<double>(src) / dst;
  const double stretch = std::max(1.0, scale);
  const double support = a * stretch;
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    const double center = (i + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::ceil(center - support));
    const int hi = static_cast<int>(std::floor(center + support));
    Tap& t = taps[static_cast<std::size_t>(i)];
    t.first = lo;
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = lanczos((j - center) / stretch, a);
      t.weights.push_back(w);
      sum += w;
    }
    for (double& w : t.weights) w /= sum;
  }
  return taps;
}

}  // namespace detail

inline constexpr int kLanczosOrder = 3;

/// Separable Lanczos-3 resampling with edge clamping. Output is clamped to
/// [0,1] since the kernel has negative lobes.
inline ImageBuffer resize_lanczos(const ImageBuffer& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::ZeroDimension, "resize target must be at least 1x1");
  }
  const int ch = img.channels();
  const auto htaps = detail::lanczos_taps(img.width(), width, kLanczosOrder);
  const auto vtaps = detail::lanczos_taps(img.height(), height, kLanczosOrder);

  // Horizontal pass into a double buffer (width x src height).
  std::vector<double> tmp(static_cast<std::size_t>(width) * img.height() * ch, 0.0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& tap = htaps[static_cast<std::size_t>(x)];
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tap.weights.size(); ++k) {
          const int sx = std::clamp(tap.first + static_cast<int>(k), 0, img.width() - 1);
          acc += tap.weights[k] * img.at(sx, y, c);
        }
        tmp[(static_cast<std::size_t>(y) * width + x) * ch + c] = acc;
      }
    }
  }

  ImageBuffer out(width, height, ch);
  for (int y = 0; y < height; ++y) {
    const auto& tap = vtaps[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tap.weights.size(); ++k) {
          const int sy = std::clamp(tap.first + static_cast<int>(k), 0, img.height() - 1);
          acc += tap.weights[k] * tmp[(static_cast<std::size_t>(sy) * width + x) * ch + c];
        }
        out.at(x, y, c) = clamp01(acc);
      }
    }
  }
  return out;
}

}  // namespace fundus
