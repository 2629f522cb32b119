#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "fundus/color.hpp"
#include "fundus/filters.hpp"
#include "fundus/histops.hpp"
#include "fundus/image.hpp"
#include "fundus/roi.hpp"

namespace fundus {

// Which plane the transmission is solved on, and whether it is inverted
// afterwards: t(1-I), t(I), 1-t(I), 1-t(1-I).
enum class MapVariant { t_of_inverted, t_of_image, one_minus_t_of_image, one_minus_t_of_inverted };

struct AmplifyMethod {
  char letter;
  double atmosphere;  // 0 brightens, 1 darkens
  MapVariant variant;
};

inline constexpr std::array<AmplifyMethod, 8> kAmplifyMethods{{
    {'A', 0.0, MapVariant::t_of_inverted},
    {'B', 0.0, MapVariant::t_of_image},
    {'C', 0.0, MapVariant::one_minus_t_of_image},
    {'D', 0.0, MapVariant::one_minus_t_of_inverted},
    {'W', 1.0, MapVariant::t_of_inverted},
    {'X', 1.0, MapVariant::t_of_image},
    {'Y', 1.0, MapVariant::one_minus_t_of_image},
    {'Z', 1.0, MapVariant::one_minus_t_of_inverted},
}};

inline constexpr double kDefaultTMin = 0.01;

struct TransmissionOptions {
  int patch = 5;            // min-filter window used to solve t
  int guide_radius = 40;    // guided-filter smoothing of t
  double guide_eps = 1e-3;
  double t_min = kDefaultTMin;
};

/// Per-pixel transmission, always within [t_min, 1].
class TransmissionMap {
 public:
  TransmissionMap(Field t, double t_min = kDefaultTMin) : t_(std::move(t)), t_min_(t_min) {
    if (!(t_min > 0.0) || t_min > 1.0) throw Error(ErrorCode::InvalidParameter, "t_min must be in (0,1]");
    for (double& v : t_.v) v = std::isfinite(v) ? std::clamp(v, t_min, 1.0) : 1.0;
  }

  static TransmissionMap constant(int width, int height, double value, double t_min = kDefaultTMin) {
    return TransmissionMap(Field(width, height, value), t_min);
  }

  int width() const noexcept { return t_.width; }
  int height() const noexcept { return t_.height; }
  double t_min() const noexcept { return t_min_; }
  double at(int x, int y) const noexcept { return t_.at(x, y); }
  const Field& field() const noexcept { return t_; }

 private:
  Field t_;
  double t_min_;
};

/// Channel minimum followed by an edge-clamped patch x patch min filter.
inline ImageBuffer dark_channel(const ImageBuffer& img, int patch) {
  require_channels(img, 3, "dark_channel");
  if (patch < 1 || patch % 2 == 0) {
    throw Error(ErrorCode::BadPatchSize, "patch must be odd and >= 1, got " + std::to_string(patch));
  }
  Field m(img.width(), img.height());
  auto src = img.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.v[i] = std::min({src[3 * i], src[3 * i + 1], src[3 * i + 2]});
  }
  return to_plane(min_filter(m, patch));
}

/// YCrCb luminance rescaled about its median so the median lands on 0.5
/// and the range stays inside [0,1]. A constant image maps to 0.5.
inline ImageBuffer depth_map(const ImageBuffer& img) {
  require_channels(img, 3, "depth_map");
  const ImageBuffer y = luminance(img);
  const auto [lo_it, hi_it] = std::minmax_element(y.data().begin(), y.data().end());
  const double lo = *lo_it, hi = *hi_it;
  ImageBuffer out(img.width(), img.height(), 1, 0.5f);
  if (hi == lo) return out;
  const double med = median(y.data());
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double scale = std::min(med > lo ? 0.5 / (med - lo) : inf, hi > med ? 0.5 / (hi - med) : inf);
  auto src = y.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = clamp01(0.5 + scale * (src[i] - med));
  return out;
}

/// Transmission for one map variant before the [t_min, 1] clamp. The
/// solved map is 1 - minfilter(plane), smoothed with the depth map as guide.
inline Field transmission_unclamped(const ImageBuffer& depth, MapVariant variant,
                                    const TransmissionOptions& opt = {}) {
  require_channels(depth, 1, "solve_transmission");
  const Field d = to_field(depth);
  const bool on_inverted =
      variant == MapVariant::t_of_inverted || variant == MapVariant::one_minus_t_of_inverted;
  Field plane = d;
  if (on_inverted) {
    for (double& v : plane.v) v = 1.0 - v;
  }
  Field raw = min_filter(plane, opt.patch);
  for (double& v : raw.v) v = 1.0 - v;
  Field t = guided_filter(d, raw, opt.guide_radius, opt.guide_eps);
  if (variant == MapVariant::one_minus_t_of_image || variant == MapVariant::one_minus_t_of_inverted) {
    for (double& v : t.v) v = 1.0 - v;
  }
  return t;
}

inline TransmissionMap solve_transmission(const ImageBuffer& depth, MapVariant variant,
                                          const TransmissionOptions& opt = {}) {
  return TransmissionMap(transmission_unclamped(depth, variant, opt), opt.t_min);
}

/// Inverts I = J t + A (1 - t) for J, per pixel and channel.
inline ImageBuffer recover_radiance(const ImageBuffer& img, double atmosphere, const TransmissionMap& t) {
  if (t.width() != img.width() || t.height() != img.height()) {
    throw Error(ErrorCode::DimensionMismatch, "transmission map does not match image");
  }
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double tv = t.at(x, y);
      for (int c = 0; c < img.channels(); ++c) {
        const double i = img.at(x, y, c);
        out.at(x, y, c) = clamp01((i - atmosphere * (1.0 - tv)) / tv);
      }
    }
  }
  return out;
}

struct SharpenParams {
  double amount = 1.0;
  double sigma = 1.5;
};

/// Unsharp mask: img + amount * (img - blur(img)).
inline ImageBuffer sharpen(const ImageBuffer& img, const SharpenParams& p = {}) {
  if (p.amount == 0.0) return img;
  const ImageBuffer blurred = gaussian_blur(img, p.sigma);
  ImageBuffer out = img;
  auto src = img.data();
  auto blr = blurred.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp01(src[i] + p.amount * (static_cast<double>(src[i]) - blr[i]));
  }
  return out;
}

struct ScoredResult {
  char letter = '?';
  ImageBuffer image;
  double score = 0.0;  // |median(luminance) - 0.5|
};

/// Distance of the candidate's median luminance from mid-gray.
inline double illumination_score(const ImageBuffer& rgb) {
  return std::abs(static_cast<double>(median(luminance(rgb).data())) - 0.5);
}

enum class PcarMode { single, composite };

struct PcarOptions {
  PcarMode mode = PcarMode::composite;
  bool sharpen = false;
  SharpenParams sharpen_params{};
  TransmissionOptions transmission{};
  float roi_threshold = kDefaultRoiThreshold;
};

struct PcarResult {
  ImageBuffer image;                 // full frame, ROI replaced
  Roi roi;
  std::vector<ScoredResult> candidates;  // in A,B,C,D,W,X,Y,Z order, ROI-sized
  std::vector<std::size_t> chosen;       // one index (single) or three (composite)
};

/// All eight amplification candidates for an (already cropped) RGB image.
inline std::vector<ScoredResult> amplify_candidates(const ImageBuffer& img, const PcarOptions& opt = {}) {
  require_channels(img, 3, "amplify_candidates");
  const ImageBuffer depth = depth_map(img);
  std::array<std::optional<TransmissionMap>, 4> maps;
  std::vector<ScoredResult> out;
  out.reserve(kAmplifyMethods.size());
  for (const AmplifyMethod& m : kAmplifyMethods) {
    auto& t = maps[static_cast<std::size_t>(m.variant)];
    if (!t) t = solve_transmission(depth, m.variant, opt.transmission);
    ImageBuffer j = recover_radiance(img, m.atmosphere, *t);
    if (opt.sharpen) j = sharpen(j, opt.sharpen_params);
    const double score = illumination_score(j);
    out.push_back({m.letter, std::move(j), score});
  }
  return out;
}

namespace detail {

inline ImageBuffer pixel_mean(const ImageBuffer& a, const ImageBuffer& b, const ImageBuffer& c) {
  ImageBuffer out = a;
  auto pa = a.data(), pb = b.data(), pc = c.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp01((static_cast<double>(pa[i]) + pb[i] + pc[i]) / 3.0);
  }
  return out;
}

}  // namespace detail

/// Auto-illumination selection over the eight amplification candidates.
///
/// single: the candidate with the lowest score (first in A..Z order on ties).
/// composite: mean of the best and second-best brightening candidates and
/// the highest-scoring darkening candidate.
inline PcarResult pcar_detailed(const ImageBuffer& img, const PcarOptions& opt = {}) {
  require_channels(img, 3, "pcar");
  RoiCrop roi = center_crop_roi(img, opt.roi_threshold);
  PcarResult r;
  r.roi = roi.roi;
  r.candidates = amplify_candidates(roi.image, opt);

  auto by_score = [&](std::size_t a, std::size_t b) { return r.candidates[a].score < r.candidates[b].score; };
  ImageBuffer selected;
  if (opt.mode == PcarMode::single) {
    std::vector<std::size_t> all(r.candidates.size());
    std::iota(all.begin(), all.end(), 0);
    r.chosen = {*std::min_element(all.begin(), all.end(), by_score)};
    selected = r.candidates[r.chosen[0]].image;
  } else {
    std::vector<std::size_t> bright{0, 1, 2, 3};
    std::stable_sort(bright.begin(), bright.end(), by_score);
    const std::vector<std::size_t> dark{4, 5, 6, 7};
    const std::size_t worst_dark = *std::max_element(dark.begin(), dark.end(), by_score);
    r.chosen = {bright[0], bright[1], worst_dark};
    selected = detail::pixel_mean(r.candidates[bright[0]].image, r.candidates[bright[1]].image,
                                  r.candidates[worst_dark].image);
  }
  r.image = paste(img, selected, r.roi);
  return r;
}

inline ImageBuffer pcar(const ImageBuffer& img, PcarMode mode = PcarMode::composite, PcarOptions opt = {}) {
  opt.mode = mode;
  return pcar_detailed(img, opt).image;
}

/// Composite PCAr followed by RGB CLAHE (clip 2.0 by default).
inline ImageBuffer pcar_clahe(const ImageBuffer& img, PcarOptions opt = {}, const ClaheParams& clahe = {}) {
  opt.mode = PcarMode::composite;
  return clahe_rgb3(pcar_detailed(img, opt).image, clahe);
}

}  // namespace fundus
