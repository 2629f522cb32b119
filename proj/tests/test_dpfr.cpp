#include <gtest/gtest.h>

#include <cmath>

#include "fundus/color.hpp"
#include "fundus/dpfr.hpp"
#include "support/expect_error.hpp"
#include "support/oracles.hpp"
#include "support/phantoms.hpp"

using namespace fundus;

namespace {

double correlation(const Field& a, const ImageBuffer& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a.v[i];
    mb += b.values()[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.v[i] - ma, y = b.values()[i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  return sab / std::sqrt(saa * sbb);
}

// Textured field under a radial gain falling from 1 at the center to 0.4 at the corners.
ImageBuffer vignette_field(int n) {
  const ImageBuffer tex = phantom::random_image(n, n, 1, 7);
  const double c = (n - 1) / 2.0, rmax = std::hypot(c, c);
  ImageBuffer img(n, n, 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double gain = 1.0 - 0.6 * std::hypot(x - c, y - c) / rmax;
      const double base = 0.5 + 0.1 * (tex.at(x, y) - 0.5);
      img.at(x, y, 0) = static_cast<float>(base * gain);
      img.at(x, y, 1) = static_cast<float>(0.8 * base * gain);
      img.at(x, y, 2) = static_cast<float>(0.6 * base * gain);
    }
  return img;
}

double corner_center_ratio(const ImageBuffer& img) {
  const int n = img.width();
  const double c = (n - 1) / 2.0, rmax = std::hypot(c, c);
  double center = 0, corner = 0;
  int nc = 0, nk = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double r = std::hypot(x - c, y - c) / rmax;
      if (r < 0.15) { center += img.at(x, y, 0); ++nc; }
      if (r > 0.9) { corner += img.at(x, y, 0); ++nk; }
    }
  return (corner / nk) / (center / nc);
}

double max_delta(const ImageBuffer& a, const ImageBuffer& b) { return oracle::max_abs_diff(a, b); }

DpfrParams zero_strength() {
  DpfrParams p;
  p.dehaze_coarse_gain = 0.0;
  p.dehaze_fine = 0.0;
  p.scatter_strength = 0.0;
  return p;
}

double background_gray(const phantom::Phantom& p, const ImageBuffer& img) {
  double acc = 0;
  int n = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (std::hypot(x - p.cx, y - p.cy) < 0.85 * p.radius && p.vessels.at(x, y) < 0.5f) {
        acc += oracle::gray(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
        ++n;
      }
  return acc / n;
}

double norm(const ImageBuffer& img) {
  double s = 0;
  for (float v : img.values()) s += double(v) * v;
  return std::sqrt(s);
}

}  // namespace

TEST(DpfrParams, DefaultsFollowTuningDirections) {
  const DpfrParams d;
  const DpfrParams ref = DpfrParams::reference();
  EXPECT_LT(d.eps_coarse, ref.eps_coarse);
  EXPECT_EQ(d.dehaze_coarse_gain, 2.0 * ref.dehaze_coarse_gain);
  EXPECT_LT(d.dehaze_fine, ref.dehaze_fine);
  EXPECT_GT(d.eps_coarse, 0.0);
  EXPECT_GT(d.scatter_strength, 0.0);
}

TEST(DpfrParams, Validation) {
  DpfrParams p;
  p.eps_coarse = 0.0;
  EXPECT_FUNDUS_ERROR(p.validate(), ErrorCode::InvalidParameter);
  p = {};
  p.dehaze_fine = 1.5;
  EXPECT_FUNDUS_ERROR(p.validate(), ErrorCode::InvalidParameter);
  p = {};
  p.scatter_strength = -0.1;
  EXPECT_FUNDUS_ERROR(p.validate(), ErrorCode::InvalidParameter);
}

TEST(Coarse, UniformIllumination) {
  const ImageBuffer img(64, 64, 3, 0.5f);
  const CoarseResult r = coarse_illumination_detailed(img);
  EXPECT_LE(max_delta(r.image, img), 1e-6);
  for (const Field& f : r.illumination)
    for (double v : f.v) ASSERT_NEAR(v, 1.0, 1e-6);
}

TEST(Coarse, VignetteFlattened) {
  const ImageBuffer img = vignette_field(128);
  ASSERT_LT(corner_center_ratio(img), 0.5);
  EXPECT_GE(corner_center_ratio(coarse_illumination(img)), 0.8);
}

TEST(Coarse, LowerEpsTracksImageMoreClosely) {
  const ImageBuffer img = vignette_field(96);
  const ImageBuffer y = luminance(img);
  DpfrParams lo, hi;
  lo.eps_coarse = 1e-3;
  hi.eps_coarse = 1e-1;
  const double c_lo = correlation(coarse_illumination_detailed(img, lo).illumination[0], y);
  const double c_hi = correlation(coarse_illumination_detailed(img, hi).illumination[0], y);
  EXPECT_GT(c_lo, c_hi);
}

TEST(Coarse, ZeroChannelIsDegenerate) {
  ImageBuffer img(32, 32, 3, 0.5f);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) img.at(x, y, 2) = 0.0f;
  EXPECT_FUNDUS_ERROR(coarse_illumination(img), ErrorCode::DegenerateImage);
}

TEST(Coarse, ZeroGainIsIdentity) {
  const ImageBuffer img = phantom::make_fundus().degraded;
  EXPECT_EQ(coarse_illumination(img, zero_strength()), img);
}

TEST(Fine, HazeFreeIsNearIdentity) {
  // Dense dark dots keep the dark channel at ~0 everywhere.
  ImageBuffer img(128, 128, 3);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const float b = (x % 6 == 0 && y % 6 == 0) ? 0.03f : 0.6f;
      img.at(x, y, 0) = b;
      img.at(x, y, 1) = 0.7f * b;
      img.at(x, y, 2) = 0.5f * b;
    }
  EXPECT_LE(max_delta(fine_illumination(img), img), 0.05);
}

TEST(Fine, WhiteVeilReducedByHalf) {
  phantom::PhantomSpec s;
  s.vignette = 0.0;
  s.veil = 0.0;
  const phantom::Phantom p = phantom::make_fundus(s);
  ImageBuffer hazy = p.clean;
  for (int y = 0; y < hazy.height(); ++y)
    for (int x = 0; x < hazy.width(); ++x)
      if (p.inside(x, y))
        for (int c = 0; c < 3; ++c) hazy.at(x, y, c) = clamp01(0.8 * hazy.at(x, y, c) + 0.2);
  const double clean = background_gray(p, p.clean), before = background_gray(p, hazy);
  const double after = background_gray(p, fine_illumination(hazy));
  EXPECT_GE((before - after) / (before - clean), 0.5);
}

TEST(Fine, ZeroStrengthIsIdentity) {
  const ImageBuffer img = phantom::make_fundus().degraded;
  EXPECT_EQ(fine_illumination(img, zero_strength()), img);
}

TEST(Fine, TransmissionWithinBounds) {
  const FineResult r = fine_illumination_detailed(phantom::make_fundus().degraded);
  for (double t : r.transmission.v) {
    ASSERT_GE(t, DpfrParams{}.t_floor);
    ASSERT_LE(t, 1.0);
  }
}

TEST(Scatter, ZeroStrengthIsIdentity) {
  const ImageBuffer img = phantom::make_fundus().degraded;
  EXPECT_EQ(scatter_suppression(img, zero_strength()), img);
}

TEST(Scatter, ConstantStaysConstant) {
  const ImageBuffer out = scatter_suppression(ImageBuffer(64, 64, 3, 0.6f));
  for (int c = 0; c < 3; ++c) {
    const ImageBuffer plane = extract_channel(out, c);
    EXPECT_LE(oracle::stddev(plane), 1e-6);
  }
}

TEST(Scatter, GlareReducedEdgesKept) {
  phantom::PhantomSpec s;
  s.vignette = 0.0;
  s.veil = 0.0;
  s.glare = true;
  const phantom::Phantom p = phantom::make_fundus(s);
  const ImageBuffer out = scatter_suppression(p.degraded);
  const double bx = p.cx + 0.4 * p.radius;
  auto blob_mean = [&](const ImageBuffer& img) {
    double a = 0;
    int n = 0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        if (std::hypot(x - bx, y - p.cy) < 0.15 * p.radius) { a += img.at(x, y, 1); ++n; }
    return a / n;
  };
  auto vessel_gradient = [&](const ImageBuffer& img) {
    double a = 0;
    for (int y = 1; y + 1 < img.height(); ++y)
      for (int x = 1; x + 1 < img.width(); ++x)
        if (p.vessels.at(x, y) > 0.5f && std::hypot(x - p.cx, y - p.cy) < 0.8 * p.radius)
          a += std::hypot(img.at(x + 1, y, 1) - img.at(x - 1, y, 1), img.at(x, y + 1, 1) - img.at(x, y - 1, 1));
    return a;
  };
  EXPECT_LT(blob_mean(out), blob_mean(p.degraded));
  const double g0 = vessel_gradient(p.degraded), g1 = vessel_gradient(out);
  EXPECT_LE(std::abs(g1 - g0), 0.1 * g0);
}

TEST(Dpfrr, EqualsFourStageComposition) {
  const ImageBuffer img = phantom::make_fundus().degraded;
  const DpfrParams p;
  const RoiCrop roi = center_crop_roi(img);
  const ImageBuffer staged = scatter_suppression(fine_illumination(coarse_illumination(roi.image, p), p), p);
  EXPECT_EQ(dpfrr(img, p), paste(img, staged, roi.roi));
}

TEST(Dpfrr, BorderPixelsBitIdentical) {
  const phantom::Phantom p = phantom::make_fundus();
  const DpfrrResult r = dpfrr_detailed(p.degraded);
  for (int y = 0; y < p.degraded.height(); ++y)
    for (int x = 0; x < p.degraded.width(); ++x) {
      const bool inside = x >= r.roi.x && x < r.roi.x + r.roi.width && y >= r.roi.y && y < r.roi.y + r.roi.height;
      if (!inside) {
        for (int c = 0; c < 3; ++c) ASSERT_EQ(r.image.at(x, y, c), p.degraded.at(x, y, c));
      }
    }
}

TEST(Dpfrr, PhantomRestoredCloserToClean) {
  for (bool glare : {false, true}) {
    phantom::PhantomSpec s;
    s.glare = glare;
    const phantom::Phantom p = phantom::make_fundus(s);
    EXPECT_LT(phantom::l2(dpfrr(p.degraded), p.clean), phantom::l2(p.degraded, p.clean)) << glare;
  }
}

TEST(Dpfrr, RangeResidualAndDeterminism) {
  const phantom::Phantom p = phantom::make_fundus();
  const DpfrrResult r = dpfrr_detailed(p.degraded);
  EXPECT_TRUE(all_finite_unit(r.image));
  EXPECT_TRUE(std::isfinite(r.residual));
  EXPECT_GE(r.residual, 0.0);
  for (double v : r.model.lens_transmission.v) ASSERT_EQ(v, 1.0);
  for (double v : r.model.scatter_transmission.v) {
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_EQ(r.model.observed.width(), r.model.restored.width());
  EXPECT_EQ(dpfrr(p.degraded), r.image);
}

TEST(Dpfrr, ReferenceParametersAlsoRun) {
  const ImageBuffer out = dpfrr(phantom::make_fundus().degraded, DpfrParams::reference());
  EXPECT_TRUE(all_finite_unit(out));
}

// Weak idempotence: a second pass moves the image less than the first.
TEST(Dpfrr, SecondPassChangesLessThanFirst) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    phantom::PhantomSpec s;
    s.seed = seed;
    const ImageBuffer x = phantom::make_fundus(s).degraded;
    const ImageBuffer once = dpfrr(x);
    const ImageBuffer twice = dpfrr(once);
    EXPECT_LT(std::abs(norm(twice) - norm(once)), std::abs(norm(once) - norm(x))) << "seed " << seed;
  }
}

TEST(DpfrrClahe, CompositionConstantAndContrast) {
  const phantom::Phantom p = phantom::make_fundus();
  const ImageBuffer d = dpfrr(p.degraded);
  const ImageBuffer dc = dpfrr_clahe(p.degraded);
  EXPECT_EQ(dc, clahe_rgb3(d));
  EXPECT_GE(phantom::vessel_contrast(p, dc), phantom::vessel_contrast(p, d));

  const ImageBuffer c = dpfrr_clahe(ImageBuffer(64, 64, 3, 0.4f));
  for (int ch = 0; ch < 3; ++ch) EXPECT_LE(oracle::stddev(extract_channel(c, ch)), 1e-6);
}

TEST(Dpfrr, Errors) {
  EXPECT_FUNDUS_ERROR(dpfrr(ImageBuffer(64, 64, 3, 0.0f)), ErrorCode::EmptyROI);
  EXPECT_FUNDUS_ERROR(dpfrr(ImageBuffer(64, 64, 1, 0.5f)), ErrorCode::WrongChannelCount);
}
