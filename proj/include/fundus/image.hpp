#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fundus/error.hpp"

namespace fundus {

/// Axis-aligned rectangle in pixel coordinates.
struct Roi {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const Roi&, const Roi&) = default;
};

/// Interleaved (row-major, channel-minor) image with intensities in [0,1].
///
/// Channels is 1 (gray) or 3 (RGB, or whatever 3-component space the caller
/// is tracking). Values are quantized to 8 bits only at I/O boundaries.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int width, int height, int channels, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  ImageBuffer(int width, int height, int channels, std::vector<float> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorCode::DimensionMismatch, "data length does not equal width*height*channels");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  float& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  bool same_size(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  void validate_shape() const {
    if (width_ <= 0 || height_ <= 0) {
      throw Error(ErrorCode::ZeroDimension,
                  "image dimensions must be positive, got " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
    if (channels_ != 1 && channels_ != 3) {
      throw Error(ErrorCode::WrongChannelCount,
                  "channels must be 1 or 3, got " + std::to_string(channels_));
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

inline float clamp01(double v) noexcept {
  if (!(v > 0.0)) return 0.0f;  // also maps NaN to 0
  if (v >= 1.0) return 1.0f;
  return static_cast<float>(v);
}

inline void require_channels(const ImageBuffer& img, int channels, const char* op) {
  if (img.channels() != channels) {
    throw Error(ErrorCode::WrongChannelCount, std::string(op) + " expects " +
                                                  std::to_string(channels) + " channel(s), got " +
                                                  std::to_string(img.channels()));
  }
}

inline void require_same_size(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
  if (!a.same_size(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(op) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

/// Upper median (element n/2 of the sorted sequence). Used consistently for
/// depth-map normalization and candidate scoring so that both agree exactly.
inline float median(std::vector<float> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of empty sequence");
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

inline float median(std::span<const float> values) {
  return median(std::vector<float>(values.begin(), values.end()));
}

inline double mean(std::span<const float> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (float v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double stddev(std::span<const float> values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double acc = 0.0;
  for (float v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

inline bool all_finite_unit(const ImageBuffer& img) noexcept {
  return std::all_of(img.data().begin(), img.data().end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

/// Copies the rectangle `roi` out of `img`.
inline ImageBuffer crop(const ImageBuffer& img, const Roi& roi) {
  if (roi.x < 0 || roi.y < 0 || roi.width <= 0 || roi.height <= 0 ||
      roi.x + roi.width > img.width() || roi.y + roi.height > img.height()) {
    throw Error(ErrorCode::IndexOutOfRange, "crop rectangle outside image");
  }
  ImageBuffer out(roi.width, roi.height, img.channels());
  const std::size_t row_len = static_cast<std::size_t>(roi.width) * img.channels();
  for (int y = 0; y < roi.height; ++y) {
    auto src = img.data().begin() + static_cast<std::ptrdiff_t>(img.index(roi.x, roi.y + y));
    std::copy_n(src, row_len, out.data().begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
  }
  return out;
}

/// Writes `patch` into a copy of `frame` at the offset of `roi`.
inline ImageBuffer paste(const ImageBuffer& frame, const ImageBuffer& patch, const Roi& roi) {
  if (patch.width() != roi.width || patch.height() != roi.height ||
      patch.channels() != frame.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "patch does not match roi/frame");
  }
  if (roi.x < 0 || roi.y < 0 || roi.x + roi.width > frame.width() ||
      roi.y + roi.height > frame.height()) {
    throw Error(ErrorCode::IndexOutOfRange, "paste rectangle outside frame");
  }
  ImageBuffer out = frame;
  const std::size_t row_len = static_cast<std::size_t>(roi.width) * frame.channels();
  for (int y = 0; y < roi.height; ++y) {
    auto src = patch.data().begin() + static_cast<std::ptrdiff_t>(patch.index(0, y));
    std::copy_n(src, row_len,
                out.data().begin() + static_cast<std::ptrdiff_t>(out.index(roi.x, roi.y + y)));
  }
  return out;
}

}  // namespace fundus
