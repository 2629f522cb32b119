#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "fundus/color.hpp"
#include "fundus/filters.hpp"
#include "fundus/histops.hpp"
#include "fundus/image.hpp"
#include "fundus/roi.hpp"

namespace fundus {

// Values of the untuned reference pipeline, kept for comparison runs.
inline constexpr double kReferenceEpsCoarse = 1e-2;
inline constexpr double kReferenceDehazeCoarseGain = 1.0;
inline constexpr double kReferenceDehazeFine = 0.95;

/// Restoration parameters. Defaults are tuned for Retcam frames; reference()
/// gives the untuned values.
struct DpfrParams {
  double eps_coarse = 1e-3;         // guided-filter regularizer of the illumination estimate
  double dehaze_coarse_gain = 2.0;  // coarse correction strength; exponent = 0.5 * gain
  double dehaze_fine = 0.25;        // fine-stage dehazing estimate (omega)
  double scatter_strength = 0.5;    // weight of the subtracted scatter field
  int radius = 0;                   // filter radius in pixels; 0 picks min(w,h)/8
  int dark_patch = 15;              // grayscale dark-channel window
  double t_floor = 0.1;             // lower bound of the fine-stage transmission
  double illumination_quantile = 0.9;  // coarse target level: this quantile of the illumination field
  float roi_threshold = kDefaultRoiThreshold;

  static DpfrParams reference() {
    DpfrParams p;
    p.eps_coarse = kReferenceEpsCoarse;
    p.dehaze_coarse_gain = kReferenceDehazeCoarseGain;
    p.dehaze_fine = kReferenceDehazeFine;
    return p;
  }

  void validate() const {
    if (!(eps_coarse > 0.0)) throw Error(ErrorCode::InvalidParameter, "eps_coarse must be > 0");
    if (!(dehaze_coarse_gain >= 0.0) || !(dehaze_fine >= 0.0) || !(scatter_strength >= 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "strength parameters must be >= 0");
    }
    if (dehaze_fine > 1.0) throw Error(ErrorCode::InvalidParameter, "dehaze_fine must be <= 1");
    if (radius < 0) throw Error(ErrorCode::InvalidParameter, "radius must be >= 0");
    if (!(t_floor > 0.0 && t_floor <= 1.0)) throw Error(ErrorCode::InvalidParameter, "t_floor must be in (0,1]");
  }

  int radius_for(const ImageBuffer& img) const noexcept {
    return radius > 0 ? radius : std::max(2, std::min(img.width(), img.height()) / 8);
  }
};

namespace detail {

inline std::vector<bool> fundus_mask(const ImageBuffer& img, float threshold) {
  std::vector<bool> m(img.pixel_count());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      m[static_cast<std::size_t>(y) * img.width() + x] = is_foreground(img, x, y, threshold);
    }
  }
  return m;
}

inline Field channel_field(const ImageBuffer& img, int c) {
  Field f(img.width(), img.height());
  for (std::size_t i = 0; i < f.size(); ++i) f.v[i] = img.data()[i * img.channels() + c];
  return f;
}

inline double masked_mean(const Field& f, const std::vector<bool>& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (mask[i]) {
      sum += f.v[i];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline constexpr double kIlluminationFloor = 0.02;

// After the coarse pass illumination is normalized, so the backscatter term
// of the reflection model has unit radiance.
inline constexpr double kScatterLight = 1.0;

inline double masked_quantile(const Field& f, const std::vector<bool>& mask, double q) {
  std::vector<double> v;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (mask[i]) v.push_back(f.v[i]);
  }
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// Replaces pixels outside the fundus with `fill` so window filters near the
// rim do not pick up the black border.
inline Field fill_outside(Field f, const std::vector<bool>& mask, double fill) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!mask[i]) f.v[i] = fill;
  }
  return f;
}

// Grayscale dark channel over fundus pixels only.
inline Field fundus_dark_channel(const ImageBuffer& img, const std::vector<bool>& mask, int patch) {
  return min_filter(fill_outside(to_field(to_grayscale(img)), mask, 1.0), patch);
}

}  // namespace detail

struct CoarseResult {
  ImageBuffer image;
  std::array<Field, 3> illumination;  // per-channel field over the target level (1 = at level)
};

/// Estimates a smooth illumination field per channel with a guided filter
/// (regularizer eps_coarse) and scales each pixel by (level / light)^(0.5 *
/// dehaze_coarse_gain), where level is the illumination_quantile of the
/// field over the fundus. Near-black border pixels pass through.
inline CoarseResult coarse_illumination_detailed(const ImageBuffer& img, const DpfrParams& p = {}) {
  require_channels(img, 3, "coarse_illumination");
  p.validate();
  const auto mask = detail::fundus_mask(img, p.roi_threshold);
  const int r = p.radius_for(img);
  const double exponent = 0.5 * p.dehaze_coarse_gain;

  CoarseResult res{img, {}};
  for (int c = 0; c < 3; ++c) {
    const Field plane = detail::channel_field(img, c);
    if (std::all_of(plane.v.begin(), plane.v.end(), [](double v) { return v <= 0.0; })) {
      throw Error(ErrorCode::DegenerateImage, "channel " + std::to_string(c) + " is constant zero");
    }
    // Guiding with a box-smoothed plane keeps vessel-scale detail out of the
    // illumination estimate even for small eps.
    const Field filled = detail::fill_outside(plane, mask, detail::masked_mean(plane, mask));
    Field light = guided_filter(box_mean(filled, r), filled, r, p.eps_coarse);
    for (double& v : light.v) v = std::max(v, detail::kIlluminationFloor);
    const double level = detail::masked_quantile(light, mask, p.illumination_quantile);
    Field& rel = res.illumination[static_cast<std::size_t>(c)];
    rel = Field(img.width(), img.height(), 1.0);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      if (!mask[i]) continue;
      rel.v[i] = light.v[i] / level;
      const double gain = exponent == 0.0 ? 1.0 : std::pow(level / light.v[i], exponent);
      res.image.data()[3 * i + c] = clamp01(plane.v[i] * gain);
    }
  }
  return res;
}

inline ImageBuffer coarse_illumination(const ImageBuffer& img, const DpfrParams& p = {}) {
  return coarse_illumination_detailed(img, p).image;
}

struct FineResult {
  ImageBuffer image;
  Field transmission;  // fine-stage t (scatter transmission estimate)
  double atmosphere = 1.0;
};

/// Dehazes the grayscale plane with a dark-channel transmission
/// t = 1 - omega * dark / A, then rescales R, G and B by the same ratio
/// so hue is kept.
inline FineResult fine_illumination_detailed(const ImageBuffer& img, const DpfrParams& p = {}) {
  require_channels(img, 3, "fine_illumination");
  p.validate();
  const auto mask = detail::fundus_mask(img, p.roi_threshold);
  const Field gray = to_field(to_grayscale(img));
  const Field dark = detail::fundus_dark_channel(img, mask, p.dark_patch);

  FineResult res{img, Field(img.width(), img.height(), 1.0), detail::kScatterLight};
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) return res;
  const double atmosphere = detail::kScatterLight;

  Field raw(img.width(), img.height());
  for (std::size_t i = 0; i < raw.size(); ++i) raw.v[i] = 1.0 - p.dehaze_fine * dark.v[i] / atmosphere;
  Field t = guided_filter(gray, raw, p.radius_for(img), 1e-3);
  for (double& v : t.v) v = std::clamp(v, p.t_floor, 1.0);

  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (!mask[i]) continue;
    const double y = gray.v[i];
    const double restored = std::clamp(y + (y - atmosphere) * (1.0 - t.v[i]) / t.v[i], 0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      float& px = res.image.data()[3 * i + c];
      px = y > 1e-6 ? clamp01(px * (restored / y)) : clamp01(restored);
    }
  }
  res.transmission = std::move(t);
  return res;
}

inline ImageBuffer fine_illumination(const ImageBuffer& img, const DpfrParams& p = {}) {
  return fine_illumination_detailed(img, p).image;
}

/// Smooth scatter field: heavily averaged grayscale dark channel, offset so
/// its minimum over the fundus is zero.
inline Field scatter_field(const ImageBuffer& img, const DpfrParams& p = {}) {
  require_channels(img, 3, "scatter_field");
  const auto mask = detail::fundus_mask(img, p.roi_threshold);
  const Field dark = detail::fundus_dark_channel(img, mask, p.dark_patch);
  const Field filled = detail::fill_outside(dark, mask, detail::masked_mean(dark, mask));
  Field smooth = box_mean(box_mean(filled, p.radius_for(img)), p.radius_for(img));
  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    if (mask[i]) floor = std::min(floor, smooth.v[i]);
  }
  if (!std::isfinite(floor)) floor = 0.0;
  for (double& v : smooth.v) v = std::max(0.0, v - floor);
  return smooth;
}

/// Subtracts scatter_strength times the smooth scatter field from every channel.
inline ImageBuffer scatter_suppression(const ImageBuffer& img, const DpfrParams& p = {}) {
  require_channels(img, 3, "scatter_suppression");
  p.validate();
  if (p.scatter_strength == 0.0) return img;
  const auto mask = detail::fundus_mask(img, p.roi_threshold);
  const Field scatter = scatter_field(img, p);
  ImageBuffer out = img;
  for (std::size_t i = 0; i < scatter.size(); ++i) {
    if (!mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      float& px = out.data()[3 * i + c];
      px = clamp01(px - p.scatter_strength * scatter.v[i]);
    }
  }
  return out;
}

/// Fields of the double-pass reflection model
///   S = I_ill * T_lens^2 * (T_sc^2 * O + 1 - T_sc)
/// as estimated by one restoration run. T_lens is folded into I_ill, so it
/// is reported as all ones.
struct ReflectionModel {
  ImageBuffer observed;                  // S
  std::array<Field, 3> illumination;     // I_ill, per channel
  Field lens_transmission;               // T_lens
  Field scatter_transmission;            // T_sc
  ImageBuffer restored;                  // O

  /// Root-mean-square reconstruction error over all pixels and channels.
  double residual() const {
    double acc = 0.0;
    const std::size_t n = observed.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
      const double tl = lens_transmission.v[i];
      const double ts = scatter_transmission.v[i];
      for (int c = 0; c < 3; ++c) {
        const double model = illumination[static_cast<std::size_t>(c)].v[i] * tl * tl *
                             (ts * ts * restored.data()[3 * i + c] + 1.0 - ts);
        const double d = observed.data()[3 * i + c] - model;
        acc += d * d;
      }
    }
    return n ? std::sqrt(acc / (3.0 * static_cast<double>(n))) : 0.0;
  }
};

struct DpfrrResult {
  ImageBuffer image;  // full frame
  Roi roi;
  ReflectionModel model;
  double residual = 0.0;
};

/// ROI crop, coarse illumination correction, fine illumination boosting and
/// scatter suppression; the restored crop is pasted back so pixels outside
/// the ROI box are untouched.
inline DpfrrResult dpfrr_detailed(const ImageBuffer& img, const DpfrParams& p = {}) {
  require_channels(img, 3, "dpfrr");
  p.validate();
  const RoiCrop roi = center_crop_roi(img, p.roi_threshold);
  CoarseResult coarse = coarse_illumination_detailed(roi.image, p);
  FineResult fine = fine_illumination_detailed(coarse.image, p);
  ImageBuffer restored = scatter_suppression(fine.image, p);

  DpfrrResult r;
  r.roi = roi.roi;
  r.model.observed = roi.image;
  r.model.illumination = std::move(coarse.illumination);
  r.model.lens_transmission = Field(roi.image.width(), roi.image.height(), 1.0);
  r.model.scatter_transmission = std::move(fine.transmission);
  r.model.restored = restored;
  r.residual = r.model.residual();
  r.image = paste(img, restored, roi.roi);
  return r;
}

inline ImageBuffer dpfrr(const ImageBuffer& img, const DpfrParams& p = {}) {
  return dpfrr_detailed(img, p).image;
}

/// DPFRr followed by RGB CLAHE (clip 2.0 by default).
inline ImageBuffer dpfrr_clahe(const ImageBuffer& img, const DpfrParams& p = {},
                               const ClaheParams& clahe = {}) {
  return clahe_rgb3(dpfrr(img, p), clahe);
}

}  // namespace fundus
