#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "fundus/image.hpp"

namespace fundus {

enum class ColorSpace { RGB, GRAY, YCRCB, LAB };

constexpr std::string_view to_string(ColorSpace cs) noexcept {
  switch (cs) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::GRAY: return "GRAY";
    case ColorSpace::YCRCB: return "YCRCB";
    case ColorSpace::LAB: return "LAB";
  }
  return "?";
}

// Grayscale weights used throughout for the "Gray" method.
inline constexpr double kGrayR = 0.30;
inline constexpr double kGrayG = 0.59;
inline constexpr double kGrayB = 0.11;

// ITU-R BT.601 luma.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline ImageBuffer to_grayscale(const ImageBuffer& img) {
  require_channels(img, 3, "to_grayscale");
  ImageBuffer out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp01(kGrayR * src[3 * i] + kGrayG * src[3 * i + 1] + kGrayB * src[3 * i + 2]);
  }
  return out;
}

/// BT.601 luma plane of an RGB image (the Y of YCrCb).
inline ImageBuffer luminance(const ImageBuffer& img) {
  require_channels(img, 3, "luminance");
  ImageBuffer out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp01(kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2]);
  }
  return out;
}

inline ImageBuffer extract_channel(const ImageBuffer& img, int idx) {
  if (idx < 0 || idx >= img.channels()) {
    throw Error(ErrorCode::IndexOutOfRange, "channel " + std::to_string(idx) + " of " +
                                                std::to_string(img.channels()));
  }
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  const auto stride = static_cast<std::size_t>(img.channels());
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * stride + idx];
  return out;
}

inline ImageBuffer merge_channels(const ImageBuffer& r, const ImageBuffer& g, const ImageBuffer& b) {
  require_channels(r, 1, "merge_channels");
  require_channels(g, 1, "merge_channels");
  require_channels(b, 1, "merge_channels");
  require_same_size(r, g, "merge_channels");
  require_same_size(r, b, "merge_channels");
  ImageBuffer out(r.width(), r.height(), 3);
  auto dst = out.data();
  auto rs = r.data(), gs = g.data(), bs = b.data();
  for (std::size_t i = 0; i < rs.size(); ++i) {
    dst[3 * i] = rs[i];
    dst[3 * i + 1] = gs[i];
    dst[3 * i + 2] = bs[i];
  }
  return out;
}

/// Applies a plane-to-plane operation to each channel and re-interleaves.
template <typename PlaneOp>
ImageBuffer map_channels(const ImageBuffer& img, PlaneOp&& op) {
  if (img.channels() == 1) return op(img);
  return merge_channels(op(extract_channel(img, 0)), op(extract_channel(img, 1)),
                        op(extract_channel(img, 2)));
}

namespace detail {

using Triple = std::array<double, 3>;

inline Triple rgb_to_ycrcb(const Triple& p) {
  const double y = kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2];
  const double cr = (p[0] - y) / (2.0 * (1.0 - kLumaR)) + 0.5;
  const double cb = (p[2] - y) / (2.0 * (1.0 - kLumaB)) + 0.5;
  return {y, cr, cb};
}

inline Triple ycrcb_to_rgb(const Triple& p) {
  const double y = p[0];
  const double r = y + 2.0 * (1.0 - kLumaR) * (p[1] - 0.5);
  const double b = y + 2.0 * (1.0 - kLumaB) * (p[2] - 0.5);
  const double g = (y - kLumaR * r - kLumaB * b) / kLumaG;
  return {r, g, b};
}

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

// D65 reference white.
inline constexpr double kXn = 0.95047;
inline constexpr double kYn = 1.0;
inline constexpr double kZn = 1.08883;

inline double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

inline double lab_finv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3.0 * d * d * (t - 4.0 / 29.0);
}

// Lab is stored normalized: L/100, (a+128)/255, (b+128)/255.
inline Triple rgb_to_lab(const Triple& p) {
  const double r = srgb_to_linear(p[0]), g = srgb_to_linear(p[1]), b = srgb_to_linear(p[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  const double l = 116.0 * fy - 16.0;
  const double a = 500.0 * (fx - fy);
  const double bb = 200.0 * (fy - fz);
  return {l / 100.0, (a + 128.0) / 255.0, (bb + 128.0) / 255.0};
}

inline Triple lab_to_rgb(const Triple& p) {
  const double l = p[0] * 100.0, a = p[1] * 255.0 - 128.0, bb = p[2] * 255.0 - 128.0;
  const double fy = (l + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - bb / 200.0;
  const double x = kXn * lab_finv(fx), y = kYn * lab_finv(fy), z = kZn * lab_finv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  return {linear_to_srgb(std::clamp(r, 0.0, 1.0)), linear_to_srgb(std::clamp(g, 0.0, 1.0)),
          linear_to_srgb(std::clamp(b, 0.0, 1.0))};
}

template <typename Fn>
ImageBuffer map_pixels3(const ImageBuffer& img, Fn&& fn) {
  ImageBuffer out(img.width(), img.height(), 3);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Triple q = fn(Triple{src[3 * i], src[3 * i + 1], src[3 * i + 2]});
    for (int c = 0; c < 3; ++c) dst[3 * i + c] = clamp01(q[c]);
  }
  return out;
}

inline ImageBuffer gray_to_rgb(const ImageBuffer& img) { return merge_channels(img, img, img); }

inline ImageBuffer to_rgb(const ImageBuffer& img, ColorSpace from) {
  switch (from) {
    case ColorSpace::RGB: return img;
    case ColorSpace::GRAY: return gray_to_rgb(img);
    case ColorSpace::YCRCB: return map_pixels3(img, ycrcb_to_rgb);
    case ColorSpace::LAB: return map_pixels3(img, lab_to_rgb);
  }
  throw Error(ErrorCode::UnsupportedConversion, "unknown source space");
}

}  // namespace detail

/// Conversions route through RGB. YCrCb is full-range BT.601 with chroma
/// offset to 0.5; Lab uses sRGB primaries with a D65 white point. GRAY
/// targets use the same weights as to_grayscale.
inline ImageBuffer convert_colorspace(const ImageBuffer& img, ColorSpace from, ColorSpace to) {
  const int expected = from == ColorSpace::GRAY ? 1 : 3;
  if (img.channels() != expected) {
    throw Error(ErrorCode::UnsupportedConversion,
                "image has " + std::to_string(img.channels()) + " channel(s) but source space is " +
                    std::string(to_string(from)));
  }
  if (from == to) return img;
  const ImageBuffer rgb = detail::to_rgb(img, from);
  switch (to) {
    case ColorSpace::RGB: return rgb;
    case ColorSpace::GRAY: return to_grayscale(rgb);
    case ColorSpace::YCRCB: return detail::map_pixels3(rgb, detail::rgb_to_ycrcb);
    case ColorSpace::LAB: return detail::map_pixels3(rgb, detail::rgb_to_lab);
  }
  throw Error(ErrorCode::UnsupportedConversion, "unknown target space");
}

}  // namespace fundus
