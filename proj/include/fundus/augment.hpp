#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fundus/image.hpp"

namespace fundus {

enum class AugmentOp { hflip, vflip, rotate, brightness };

inline constexpr double kMaxRotationDeg = 15.0;
inline constexpr double kMaxBrightnessDelta = 0.10;

inline std::string_view to_string(AugmentOp op) noexcept {
  switch (op) {
    case AugmentOp::hflip: return "hflip";
    case AugmentOp::vflip: return "vflip";
    case AugmentOp::rotate: return "rot15";
    case AugmentOp::brightness: return "bright10";
  }
  return "?";
}

/// Parses a comma-separated list such as "hflip,rot15".
inline std::vector<AugmentOp> parse_augment_ops(std::string_view spec) {
  std::vector<AugmentOp> ops;
  std::stringstream ss{std::string(spec)};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "hflip") ops.push_back(AugmentOp::hflip);
    else if (tok == "vflip") ops.push_back(AugmentOp::vflip);
    else if (tok == "rot15" || tok == "rotate") ops.push_back(AugmentOp::rotate);
    else if (tok == "bright10" || tok == "brightness") ops.push_back(AugmentOp::brightness);
    else throw Error(ErrorCode::InvalidParameter, "unknown augmentation '" + tok + "'");
  }
  return ops;
}

inline ImageBuffer hflip(const ImageBuffer& img) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

inline ImageBuffer vflip(const ImageBuffer& img) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, img.height() - 1 - y, c) = img.at(x, y, c);
  return out;
}

/// Bilinear rotation about the image center; uncovered pixels become black.
inline ImageBuffer rotate(const ImageBuffer& img, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        auto sample = [&](int xi, int yi) -> double {
          if (xi < 0 || yi < 0 || xi >= img.width() || yi >= img.height()) return 0.0;
          return img.at(xi, yi, c);
        };
        const double v = (1 - fy) * ((1 - fx) * sample(x0, y0) + fx * sample(x0 + 1, y0)) +
                         fy * ((1 - fx) * sample(x0, y0 + 1) + fx * sample(x0 + 1, y0 + 1));
        out.at(x, y, c) = clamp01(v);
      }
    }
  }
  return out;
}

inline ImageBuffer scale_brightness(const ImageBuffer& img, double factor) {
  ImageBuffer out = img;
  for (float& v : out.data()) v = clamp01(v * factor);
  return out;
}

struct AugmentedImage {
  std::string tag;  // "orig" for the untouched input
  ImageBuffer image;
};

/// The original followed by one variant per op. Random parameters come from
/// a 64-bit Mersenne Twister seeded with `seed`, mapped to [0,1) by hand so
/// results do not depend on the standard library's distributions.
inline std::vector<AugmentedImage> augment(const ImageBuffer& img, const std::vector<AugmentOp>& ops,
                                           std::uint64_t seed) {
  std::vector<AugmentedImage> out{{"orig", img}};
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (AugmentOp op : ops) {
    switch (op) {
      case AugmentOp::hflip: out.push_back({"hflip", hflip(img)}); break;
      case AugmentOp::vflip: out.push_back({"vflip", vflip(img)}); break;
      case AugmentOp::rotate:
        out.push_back({"rot", rotate(img, (2.0 * unit() - 1.0) * kMaxRotationDeg)});
        break;
      case AugmentOp::brightness:
        out.push_back({"bright", scale_brightness(img, 1.0 + (2.0 * unit() - 1.0) * kMaxBrightnessDelta)});
        break;
    }
  }
  return out;
}

}  // namespace fundus
