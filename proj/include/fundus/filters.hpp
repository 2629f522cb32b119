#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fundus/color.hpp"
#include "fundus/image.hpp"

namespace fundus {

enum class Boundary { clamp, wrap };

/// Unbounded scalar field in double precision. Used for intermediates that
/// may leave [0,1] (guided-filter coefficients, transmission before clamping).
struct Field {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Field() = default;
  Field(int w, int h, double fill = 0.0)
      : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) noexcept { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const noexcept { return v[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const noexcept { return v.size(); }
};

inline Field to_field(const ImageBuffer& plane) {
  require_channels(plane, 1, "to_field");
  Field f(plane.width(), plane.height());
  std::copy(plane.data().begin(), plane.data().end(), f.v.begin());
  return f;
}

inline ImageBuffer to_plane(const Field& f) {
  ImageBuffer out(f.width, f.height, 1);
  auto dst = out.data();
  for (std::size_t i = 0; i < f.size(); ++i) dst[i] = clamp01(f.v[i]);
  return out;
}

namespace detail {

inline int boundary_index(int i, int n, Boundary b) noexcept {
  if (b == Boundary::wrap) return ((i % n) + n) % n;
  return std::clamp(i, 0, n - 1);
}

// Summed-area table with a zero top row/left column.
inline std::vector<double> integral(const Field& f) {
  const std::size_t w1 = static_cast<std::size_t>(f.width) + 1;
  std::vector<double> s(w1 * (f.height + 1), 0.0);
  for (int y = 0; y < f.height; ++y) {
    double row = 0.0;
    for (int x = 0; x < f.width; ++x) {
      row += f.at(x, y);
      s[(y + 1) * w1 + x + 1] = s[y * w1 + x + 1] + row;
    }
  }
  return s;
}

// Separable 1-D pass: out[i] = sum_k weights[k] * in[i + k + offset].
inline Field separable_pass(const Field& in, const std::vector<double>& weights, int offset,
                            bool horizontal, Boundary b) {
  Field out(in.width, in.height);
  const int n = horizontal ? in.width : in.height;
  const int k = static_cast<int>(weights.size());
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const int i = horizontal ? x : y;
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        const int s = boundary_index(i + j + offset, n, b);
        acc += weights[j] * (horizontal ? in.at(s, y) : in.at(x, s));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline Field min_pass(const Field& in, int radius, bool horizontal) {
  Field out(in.width, in.height);
  const int n = horizontal ? in.width : in.height;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const int i = horizontal ? x : y;
      double m = std::numeric_limits<double>::infinity();
      for (int j = std::max(0, i - radius); j <= std::min(n - 1, i + radius); ++j) {
        m = std::min(m, horizontal ? in.at(j, y) : in.at(x, j));
      }
      out.at(x, y) = m;
    }
  }
  return out;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

}  // namespace detail

/// Mean over the (2r+1)^2 window clipped to the image, normalized by the
/// number of pixels actually inside the window.
inline Field box_mean(const Field& f, int radius) {
  const auto s = detail::integral(f);
  const std::size_t w1 = static_cast<std::size_t>(f.width) + 1;
  Field out(f.width, f.height);
  for (int y = 0; y < f.height; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(f.height, y + radius + 1);
    for (int x = 0; x < f.width; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(f.width, x + radius + 1);
      const double sum = s[y1 * w1 + x1] - s[y0 * w1 + x1] - s[y1 * w1 + x0] + s[y0 * w1 + x0];
      out.at(x, y) = sum / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

/// Box average over a size x size window covering offsets
/// [-size/2, size - size/2 - 1] on each axis (the centering that a "same"
/// 2-D convolution uses for even kernels), normalized by size^2.
inline Field box_average(const Field& f, int size, Boundary b) {
  if (size < 1) throw Error(ErrorCode::BadPatchSize, "box size must be >= 1");
  const std::vector<double> ones(static_cast<std::size_t>(size), 1.0);
  const int offset = -(size / 2);
  Field rows = detail::separable_pass(f, ones, offset, true, b);
  Field out = detail::separable_pass(rows, ones, offset, false, b);
  const double norm = 1.0 / (static_cast<double>(size) * size);
  for (double& v : out.v) v *= norm;
  return out;
}

inline Field gaussian_blur(const Field& f, double sigma, Boundary b = Boundary::clamp) {
  if (!(sigma > 0.0)) return f;
  const auto k = detail::gaussian_kernel(sigma);
  const int offset = -static_cast<int>(k.size() / 2);
  return detail::separable_pass(detail::separable_pass(f, k, offset, true, b), k, offset, false, b);
}

inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma,
                                 Boundary b = Boundary::clamp) {
  return map_channels(img, [&](const ImageBuffer& p) {
    return to_plane(gaussian_blur(to_field(p), sigma, b));
  });
}

/// Edge-clamped min filter over a patch x patch window (patch odd).
inline Field min_filter(const Field& f, int patch) {
  if (patch < 1 || patch % 2 == 0) {
    throw Error(ErrorCode::BadPatchSize, "patch must be odd and >= 1, got " + std::to_string(patch));
  }
  if (patch == 1) return f;
  const int r = patch / 2;
  return detail::min_pass(detail::min_pass(f, r, true), r, false);
}

/// Single-channel guided filter (He, Sun & Tang). `guide` and `src` must
/// share dimensions. Output is not clamped.
inline Field guided_filter(const Field& guide, const Field& src, int radius, double eps) {
  if (guide.width != src.width || guide.height != src.height) {
    throw Error(ErrorCode::DimensionMismatch, "guided_filter guide/src size mismatch");
  }
  const std::size_t n = src.size();
  Field ip(src.width, src.height), ii(src.width, src.height);
  for (std::size_t i = 0; i < n; ++i) {
    ip.v[i] = guide.v[i] * src.v[i];
    ii.v[i] = guide.v[i] * guide.v[i];
  }
  const Field mean_i = box_mean(guide, radius);
  const Field mean_p = box_mean(src, radius);
  const Field mean_ip = box_mean(ip, radius);
  const Field mean_ii = box_mean(ii, radius);

  Field a(src.width, src.height), b(src.width, src.height);
  for (std::size_t i = 0; i < n; ++i) {
    const double cov = mean_ip.v[i] - mean_i.v[i] * mean_p.v[i];
    const double var = std::max(0.0, mean_ii.v[i] - mean_i.v[i] * mean_i.v[i]);
    a.v[i] = cov / (var + eps);
    b.v[i] = mean_p.v[i] - a.v[i] * mean_i.v[i];
  }
  const Field mean_a = box_mean(a, radius);
  const Field mean_b = box_mean(b, radius);
  Field q(src.width, src.height);
  for (std::size_t i = 0; i < n; ++i) q.v[i] = mean_a.v[i] * guide.v[i] + mean_b.v[i];
  return q;
}

}  // namespace fundus
