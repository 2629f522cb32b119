#pragma once

#include <algorithm>

#include "fundus/image.hpp"

namespace fundus {

inline constexpr float kDefaultRoiThreshold = 0.02f;
inline constexpr int kMinRoiInput = 32;

struct RoiCrop {
  ImageBuffer image;
  Roi roi;  // offset and size of `image` inside the source frame
};

/// A pixel belongs to the fundus when any channel reaches `threshold`.
inline bool is_foreground(const ImageBuffer& img, int x, int y, float threshold) noexcept {
  for (int c = 0; c < img.channels(); ++c) {
    if (img.at(x, y, c) >= threshold) return true;
  }
  return false;
}

/// Bounding box of the circular fundus region, found by discarding the
/// near-black camera border.
inline RoiCrop center_crop_roi(const ImageBuffer& img, float threshold = kDefaultRoiThreshold) {
  if (img.width() < kMinRoiInput || img.height() < kMinRoiInput) {
    throw Error(ErrorCode::ImageTooSmall, "center_crop_roi needs at least 32x32 input");
  }
  int x0 = img.width(), y0 = img.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!is_foreground(img, x, y, threshold)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorCode::EmptyROI, "no pixel above the border threshold");
  const Roi roi{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  return {crop(img, roi), roi};
}

}  // namespace fundus
