#pragma once

#include <filesystem>
#include <string>

#include "fundus/color.hpp"
#include "fundus/filters.hpp"
#include "fundus/image.hpp"
#include "fundus/io.hpp"

namespace fundus {

/// Mask values strictly above this mark vessel pixels.
inline constexpr float kVesselThreshold = 0.1f;

/// Soft vessel probability map in [0,1].
class VesselMask {
 public:
  VesselMask(int width, int height, float fill = 0.0f) : plane_(width, height, 1, fill) {}

  explicit VesselMask(ImageBuffer plane) : plane_(std::move(plane)) {
    require_channels(plane_, 1, "VesselMask");
    for (float& v : plane_.data()) v = clamp01(v);
  }

  int width() const noexcept { return plane_.width(); }
  int height() const noexcept { return plane_.height(); }
  float at(int x, int y) const noexcept { return plane_.at(x, y); }
  float& at(int x, int y) noexcept { return plane_.at(x, y); }
  bool is_vessel(int x, int y) const noexcept { return plane_.at(x, y) > kVesselThreshold; }
  const ImageBuffer& plane() const noexcept { return plane_; }

  std::size_t vessel_count() const noexcept {
    std::size_t n = 0;
    for (float v : plane_.data()) n += v > kVesselThreshold ? 1 : 0;
    return n;
  }

 private:
  ImageBuffer plane_;
};

enum class ErosionKernel { average, gaussian };

struct ErosionParams {
  int start_patch = 32;
  int min_patch = 2;  // the loop keeps halving while patch >= min_patch
  ErosionKernel kernel = ErosionKernel::average;
  Boundary boundary = Boundary::wrap;

  void validate() const {
    const bool pow2 = start_patch >= 4 && start_patch <= 64 && (start_patch & (start_patch - 1)) == 0;
    if (!pow2) throw Error(ErrorCode::InvalidParameter, "start_patch must be one of 4, 8, 16, 32, 64");
    if (min_patch < 1) throw Error(ErrorCode::InvalidParameter, "min_patch must be >= 1");
  }
};

namespace detail {
inline void require_mask_fits(const ImageBuffer& img, const VesselMask& mask, const char* op) {
  if (img.width() != mask.width() || img.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": mask is " +
                                                  std::to_string(mask.width()) + "x" +
                                                  std::to_string(mask.height()) + ", image is " +
                                                  std::to_string(img.width()) + "x" +
                                                  std::to_string(img.height()));
  }
}
}  // namespace detail

/// Takes `blurred` on vessel pixels and `channel` everywhere else.
inline ImageBuffer choose_side(const ImageBuffer& blurred, const ImageBuffer& channel, const VesselMask& mask) {
  require_channels(channel, 1, "choose_side");
  require_channels(blurred, 1, "choose_side");
  require_same_size(blurred, channel, "choose_side");
  detail::require_mask_fits(channel, mask, "choose_side");
  ImageBuffer out = channel;
  for (int y = 0; y < channel.height(); ++y) {
    for (int x = 0; x < channel.width(); ++x) {
      if (mask.is_vessel(x, y)) out.at(x, y) = blurred.at(x, y);
    }
  }
  return out;
}

/// Multi-scale fill of vessel pixels: at each scale the box average (and
/// optionally a Gaussian with sigma = patch/4) of the current plane replaces
/// the vessel pixels, then the patch halves.
inline ImageBuffer blend_vessel(const ImageBuffer& channel, const VesselMask& mask, const ErosionParams& p = {}) {
  require_channels(channel, 1, "blend_vessel");
  detail::require_mask_fits(channel, mask, "blend_vessel");
  p.validate();
  ImageBuffer current = channel;
  if (mask.vessel_count() == 0) return current;
  for (int patch = p.start_patch; patch >= p.min_patch; patch /= 2) {
    Field blur = box_average(to_field(current), patch, p.boundary);
    if (p.kernel == ErosionKernel::gaussian) blur = gaussian_blur(blur, patch / 4.0, p.boundary);
    current = choose_side(to_plane(blur), current, mask);
  }
  return current;
}

inline ImageBuffer clean_image(const ImageBuffer& img, const VesselMask& mask, const ErosionParams& p = {}) {
  require_channels(img, 3, "clean_image");
  detail::require_mask_fits(img, mask, "clean_image");
  return map_channels(img, [&](const ImageBuffer& plane) { return blend_vessel(plane, mask, p); });
}

/// Nearest-neighbour rescale of a mask plane (keeps the threshold semantics).
inline ImageBuffer resize_nearest(const ImageBuffer& img, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::ZeroDimension, "resize target must be at least 1x1");
  ImageBuffer out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>((y + 0.5) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / width));
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

/// Reads an externally produced segmentation map. With `rescale` false a
/// size mismatch is an error instead of a nearest-neighbour resample.
inline VesselMask load_mask(const std::filesystem::path& path, int width, int height, bool rescale = true) {
  ImageBuffer plane = load_gray_image(path);
  if (plane.width() != width || plane.height() != height) {
    if (!rescale) {
      throw Error(ErrorCode::DimensionMismatch, path.string() + " is " + std::to_string(plane.width()) +
                                                    "x" + std::to_string(plane.height()));
    }
    plane = resize_nearest(plane, width, height);
  }
  return VesselMask(std::move(plane));
}

}  // namespace fundus
