#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fundus/color.hpp"
#include "fundus/image.hpp"

namespace fundus {

inline constexpr int kHistBins = 256;
inline constexpr int kMinTileSide = 8;

struct ClaheParams {
  double clip_limit = 2.0;  // multiple of the mean bin height; infinity disables clipping
  int tile_rows = 8;
  int tile_cols = 8;

  void validate() const {
    if (!(clip_limit >= 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "clip_limit must be >= 1.0");
    }
    if (tile_rows < 1 || tile_cols < 1) {
      throw Error(ErrorCode::InvalidParameter, "tile grid dimensions must be >= 1");
    }
  }
};

inline int hist_bin(float v) noexcept {
  return static_cast<int>(std::lround(static_cast<double>(clamp01(v)) * (kHistBins - 1)));
}

namespace detail {

using Histogram = std::array<std::int64_t, kHistBins>;

// Maps a pixel given its tile. A tile whose samples all fall in one bin has
// no usable CDF and maps every value to itself.
struct ToneMap {
  bool identity = false;
  std::array<float, kHistBins> lut{};

  float operator()(float v, int bin) const noexcept { return identity ? v : lut[bin]; }
};

inline ToneMap cdf_map(const Histogram& h) {
  ToneMap m;
  std::int64_t total = 0;
  int occupied = 0;
  for (auto c : h) {
    total += c;
    occupied += c > 0 ? 1 : 0;
  }
  if (occupied <= 1) {
    m.identity = true;
    return m;
  }
  std::int64_t run = 0;
  for (int b = 0; b < kHistBins; ++b) {
    run += h[b];
    m.lut[b] = static_cast<float>(static_cast<double>(run) / static_cast<double>(total));
  }
  return m;
}

// Caps every bin at the clip count and spreads the excess evenly in a single
// pass. The remainder goes out one count per bin at a fixed stride, so the
// histogram keeps its mass; dropping it makes small tiles over-amplify.
inline Histogram clip_histogram(Histogram h, double clip_limit, std::int64_t area) {
  if (std::isinf(clip_limit)) return h;
  const auto clip = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(clip_limit * static_cast<double>(area) / kHistBins));
  std::int64_t excess = 0;
  for (auto& c : h) {
    if (c > clip) {
      excess += c - clip;
      c = clip;
    }
  }
  const std::int64_t share = excess / kHistBins;
  for (auto& c : h) c += share;
  std::int64_t residual = excess % kHistBins;
  if (residual > 0) {
    const std::int64_t step = std::max<std::int64_t>(kHistBins / residual, 1);
    for (std::int64_t b = 0; b < kHistBins && residual > 0; b += step, --residual) ++h[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace detail

/// Global histogram equalization: v -> CDF(bin(v)) / N over 256 bins.
inline ImageBuffer hist_equalize(const ImageBuffer& img) {
  require_channels(img, 1, "hist_equalize");
  detail::Histogram h{};
  for (float v : img.data()) ++h[hist_bin(v)];
  const detail::ToneMap map = detail::cdf_map(h);
  ImageBuffer out = img;
  for (float& v : out.data()) v = map(v, hist_bin(v));
  return out;
}

/// Contrast-limited adaptive histogram equalization of one plane.
///
/// The image is split into tile_rows x tile_cols contextual regions (sizes
/// differ by at most one pixel). Each region gets a clipped-histogram tone
/// map; pixels blend the four nearest maps bilinearly by distance to tile
/// centers, and pixels beyond the outermost centers reuse the edge maps.
inline ImageBuffer clahe_channel(const ImageBuffer& img, const ClaheParams& p = {}) {
  require_channels(img, 1, "clahe_channel");
  p.validate();
  const int w = img.width(), h = img.height();
  if (w / p.tile_cols < kMinTileSide || h / p.tile_rows < kMinTileSide) {
    throw Error(ErrorCode::TileTooSmall,
                std::to_string(w) + "x" + std::to_string(h) + " image with " +
                    std::to_string(p.tile_rows) + "x" + std::to_string(p.tile_cols) +
                    " grid gives tiles under 8x8");
  }

  std::vector<int> ys(p.tile_rows + 1), xs(p.tile_cols + 1);
  for (int i = 0; i <= p.tile_rows; ++i) ys[i] = static_cast<int>(static_cast<long>(i) * h / p.tile_rows);
  for (int i = 0; i <= p.tile_cols; ++i) xs[i] = static_cast<int>(static_cast<long>(i) * w / p.tile_cols);

  std::vector<detail::ToneMap> maps(static_cast<std::size_t>(p.tile_rows) * p.tile_cols);
  for (int ty = 0; ty < p.tile_rows; ++ty) {
    for (int tx = 0; tx < p.tile_cols; ++tx) {
      detail::Histogram hist{};
      for (int y = ys[ty]; y < ys[ty + 1]; ++y) {
        for (int x = xs[tx]; x < xs[tx + 1]; ++x) ++hist[hist_bin(img.at(x, y))];
      }
      const std::int64_t area =
          static_cast<std::int64_t>(ys[ty + 1] - ys[ty]) * (xs[tx + 1] - xs[tx]);
      // Occupancy is judged before clipping: redistribution would spread a
      // single-valued tile over every bin.
      const bool flat = std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; }) <= 1;
      auto& map = maps[static_cast<std::size_t>(ty) * p.tile_cols + tx];
      if (flat) {
        map.identity = true;
      } else {
        map = detail::cdf_map(detail::clip_histogram(hist, p.clip_limit, area));
      }
    }
  }

  auto centers = [](const std::vector<int>& edges) {
    std::vector<double> c(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) c[i] = (edges[i] + edges[i + 1] - 1) / 2.0;
    return c;
  };
  const auto cy = centers(ys), cx = centers(xs);

  // For coordinate v, the pair of neighbouring tiles and the weight of the second.
  auto locate = [](const std::vector<double>& c, int v) {
    struct Span { int lo, hi; double t; };
    if (v <= c.front()) return Span{0, 0, 0.0};
    if (v >= c.back()) {
      const int last = static_cast<int>(c.size()) - 1;
      return Span{last, last, 0.0};
    }
    int k = 0;
    while (c[k + 1] <= v) ++k;
    return Span{k, k + 1, (v - c[k]) / (c[k + 1] - c[k])};
  };

  ImageBuffer out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const auto sy = locate(cy, y);
    for (int x = 0; x < w; ++x) {
      const auto sx = locate(cx, x);
      const float v = img.at(x, y);
      const int b = hist_bin(v);
      auto m = [&](int ty, int tx) {
        return static_cast<double>(maps[static_cast<std::size_t>(ty) * p.tile_cols + tx](v, b));
      };
      const double top = (1.0 - sx.t) * m(sy.lo, sx.lo) + sx.t * m(sy.lo, sx.hi);
      const double bottom = (1.0 - sx.t) * m(sy.hi, sx.lo) + sx.t * m(sy.hi, sx.hi);
      out.at(x, y) = clamp01((1.0 - sy.t) * top + sy.t * bottom);
    }
  }
  return out;
}

/// CLAHE applied independently to R, G and B.
inline ImageBuffer clahe_rgb3(const ImageBuffer& img, const ClaheParams& p = {}) {
  require_channels(img, 3, "clahe_rgb3");
  return map_channels(img, [&](const ImageBuffer& plane) { return clahe_channel(plane, p); });
}

/// CLAHE-Green-Histogram: RGB CLAHE, keep green, then global equalization.
inline ImageBuffer cgh(const ImageBuffer& img, const ClaheParams& p = {}) {
  require_channels(img, 3, "cgh");
  return hist_equalize(extract_channel(clahe_rgb3(img, p), 1));
}

}  // namespace fundus
