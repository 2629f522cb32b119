#pragma once

// Synthetic fundus phantoms shared by the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fundus/image.hpp"
#include "fundus/vessel_erosion.hpp"

namespace phantom {

using fundus::ImageBuffer;

struct Phantom {
  ImageBuffer clean;     // ideal fundus
  ImageBuffer degraded;  // clean with vignette, veil (and optional glare)
  ImageBuffer vessels;   // 1 on vessel pixels, 0 elsewhere (gray plane)
  double cx = 0, cy = 0, radius = 0;

  bool inside(int x, int y) const {
    const double dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy <= radius * radius;
  }
};

struct PhantomSpec {
  int size = 128;
  double vignette = 0.5;   // fractional illumination loss at the rim
  double veil = 0.25;      // 1 - transmission of the additive haze
  double veil_light = 0.8; // haze colour (gray)
  bool glare = false;
  int vessel_count = 4;
  std::uint64_t seed = 1;
};

inline Phantom make_fundus(const PhantomSpec& s = {}) {
  Phantom p;
  const int n = s.size;
  p.cx = (n - 1) / 2.0;
  p.cy = (n - 1) / 2.0;
  p.radius = 0.45 * n;
  p.clean = ImageBuffer(n, n, 3, 0.0f);
  p.vessels = ImageBuffer(n, n, 1, 0.0f);

  // Vessels: straight lines through random points, 2 px wide.
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Line { double a, b, c; };
  std::vector<Line> lines;
  for (int k = 0; k < s.vessel_count; ++k) {
    const double ang = u(rng) * 3.14159265358979;
    const double px = p.cx + (u(rng) - 0.5) * p.radius;
    const double py = p.cy + (u(rng) - 0.5) * p.radius;
    lines.push_back({std::sin(ang), -std::cos(ang), -(std::sin(ang) * px - std::cos(ang) * py)});
  }

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!p.inside(x, y)) continue;
      bool vessel = false;
      for (const auto& l : lines) vessel = vessel || std::abs(l.a * x + l.b * y + l.c) < 1.0;
      const double shade = vessel ? 0.55 : 1.0;
      p.clean.at(x, y, 0) = static_cast<float>(0.80 * shade);
      p.clean.at(x, y, 1) = static_cast<float>(0.45 * shade);
      p.clean.at(x, y, 2) = static_cast<float>(0.25 * shade);
      p.vessels.at(x, y) = vessel ? 1.0f : 0.0f;
    }
  }

  p.degraded = p.clean;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!p.inside(x, y)) continue;
      const double r = std::hypot(x - p.cx, y - p.cy) / p.radius;
      const double light = 1.0 - s.vignette * r * r;
      double glare = 0.0;
      if (s.glare) {
        const double g = std::hypot(x - (p.cx + 0.4 * p.radius), y - p.cy) / (0.15 * p.radius);
        glare = 0.3 * std::exp(-g * g);
      }
      for (int c = 0; c < 3; ++c) {
        const double j = p.clean.at(x, y, c) * light;
        const double hazy = j * (1.0 - s.veil) + s.veil_light * s.veil + glare;
        p.degraded.at(x, y, c) = fundus::clamp01(hazy);
      }
    }
  }
  return p;
}

inline double l2(const ImageBuffer& a, const ImageBuffer& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a.data()[i]) - double(b.data()[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Mean background (non-vessel, inside disc) minus mean vessel value on the
/// grayscale of `img`.
inline double vessel_contrast(const Phantom& p, const ImageBuffer& img) {
  double vs = 0, bs = 0;
  int vn = 0, bn = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      // Stay clear of the rim where the disc edge dominates.
      if (std::hypot(x - p.cx, y - p.cy) > 0.85 * p.radius) continue;
      double g = 0;
      if (img.channels() == 3) {
        g = 0.3 * img.at(x, y, 0) + 0.59 * img.at(x, y, 1) + 0.11 * img.at(x, y, 2);
      } else {
        g = img.at(x, y);
      }
      if (p.vessels.at(x, y) > 0.5f) { vs += g; ++vn; } else { bs += g; ++bn; }
    }
  }
  return bs / bn - vs / vn;
}

inline ImageBuffer random_image(int w, int h, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(w, h, channels);
  for (float& v : img.data()) v = u(rng);
  return img;
}

/// Random 8-bit-representable image (values k/255).
inline ImageBuffer random_image8(int w, int h, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  ImageBuffer img(w, h, channels);
  for (float& v : img.data()) v = static_cast<float>(u(rng)) / 255.0f;
  return img;
}

/// Random smooth-ish mask with a handful of thick blobs and thin lines.
inline fundus::VesselMask random_mask(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  fundus::VesselMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = u(rng) < 0.1f ? u(rng) : 0.0f;
  return m;
}

}  // namespace phantom
