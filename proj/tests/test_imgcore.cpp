#include <gtest/gtest.h>

#include <random>

#include "fundus/color.hpp"
#include "fundus/resize.hpp"
#include "fundus/roi.hpp"
#include "support/expect_error.hpp"
#include "support/oracles.hpp"
#include "support/phantoms.hpp"

using namespace fundus;

namespace {
ImageBuffer pixel(float r, float g, float b) { return ImageBuffer(1, 1, 3, std::vector<float>{r, g, b}); }
}  // namespace

TEST(ImageBuffer, ShapeInvariants) {
  ImageBuffer img(4, 3, 3, 0.25f);
  EXPECT_EQ(img.size(), 36u);
  EXPECT_EQ(img.pixel_count(), 12u);
  EXPECT_FUNDUS_ERROR(ImageBuffer(0, 3, 1), ErrorCode::ZeroDimension);
  EXPECT_FUNDUS_ERROR(ImageBuffer(2, 2, 2), ErrorCode::WrongChannelCount);
  EXPECT_FUNDUS_ERROR(ImageBuffer(2, 2, 1, std::vector<float>(3)), ErrorCode::DimensionMismatch);
}

TEST(ImageBuffer, Clamp01MapsNanToZero) {
  EXPECT_EQ(clamp01(std::nan("")), 0.0f);
  EXPECT_EQ(clamp01(-3.0), 0.0f);
  EXPECT_EQ(clamp01(7.0), 1.0f);
  EXPECT_EQ(clamp01(0.25), 0.25f);
}

TEST(Grayscale, SpecExamples) {
  EXPECT_FLOAT_EQ(to_grayscale(pixel(1, 1, 1)).at(0, 0), 1.0f);
  EXPECT_NEAR(to_grayscale(pixel(0, 1, 0)).at(0, 0), 0.59f, 1e-7);
  EXPECT_FLOAT_EQ(to_grayscale(pixel(0.5f, 0.5f, 0.5f)).at(0, 0), 0.5f);
  EXPECT_EQ(to_grayscale(pixel(0.1f, 0.2f, 0.3f)).channels(), 1);
}

TEST(Grayscale, RejectsGrayInput) {
  EXPECT_FUNDUS_ERROR(to_grayscale(ImageBuffer(2, 2, 1)), ErrorCode::WrongChannelCount);
}

TEST(Grayscale, MatchesScalarOracle) {
  const ImageBuffer img = phantom::random_image(100, 100, 3, 11);
  const ImageBuffer g = to_grayscale(img);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double ref = oracle::gray(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
      ASSERT_NEAR(g.at(x, y), ref, 1e-6);
    }
  }
}

TEST(Grayscale, GrayPixelFixedPoint) {
  for (int k = 0; k <= 255; ++k) {
    const float v = k / 255.0f;
    EXPECT_NEAR(to_grayscale(pixel(v, v, v)).at(0, 0), v, 1e-6f);
  }
}

TEST(Channels, ExtractExamples) {
  EXPECT_FLOAT_EQ(extract_channel(pixel(0.2f, 0.7f, 0.1f), 1).at(0, 0), 0.7f);
  const ImageBuffer g = phantom::random_image(5, 4, 1, 3);
  EXPECT_EQ(extract_channel(g, 0), g);
  EXPECT_FUNDUS_ERROR(extract_channel(pixel(0, 0, 0), 3), ErrorCode::IndexOutOfRange);
  EXPECT_FUNDUS_ERROR(extract_channel(pixel(0, 0, 0), -1), ErrorCode::IndexOutOfRange);
}

TEST(Channels, SplitMergeIsExactBijection) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImageBuffer x = phantom::random_image(17, 9, 3, seed);
    const ImageBuffer merged = merge_channels(extract_channel(x, 0), extract_channel(x, 1), extract_channel(x, 2));
    EXPECT_EQ(merged, x);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(extract_channel(merged, k), extract_channel(x, k));
  }
}

TEST(Channels, MergeIdenticalPlanes) {
  const ImageBuffer p = phantom::random_image(6, 6, 1, 5);
  const ImageBuffer m = merge_channels(p, p, p);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(m.at(x, y, c), p.at(x, y));
}

TEST(Channels, MergeDimensionMismatch) {
  EXPECT_FUNDUS_ERROR(merge_channels(ImageBuffer(640, 480, 1), ImageBuffer(320, 240, 1), ImageBuffer(640, 480, 1)),
                      ErrorCode::DimensionMismatch);
  EXPECT_FUNDUS_ERROR(merge_channels(ImageBuffer(4, 4, 3), ImageBuffer(4, 4, 1), ImageBuffer(4, 4, 1)),
                      ErrorCode::WrongChannelCount);
}

TEST(ColorSpace, WhiteAndBlack) {
  const ImageBuffer w = convert_colorspace(pixel(1, 1, 1), ColorSpace::RGB, ColorSpace::YCRCB);
  EXPECT_NEAR(w.at(0, 0, 0), 1.0f, 1e-6);
  EXPECT_NEAR(w.at(0, 0, 1), 0.5f, 1e-6);
  EXPECT_NEAR(w.at(0, 0, 2), 0.5f, 1e-6);
  EXPECT_NEAR(convert_colorspace(pixel(0, 0, 0), ColorSpace::RGB, ColorSpace::YCRCB).at(0, 0, 0), 0.0f, 1e-7);
  const ImageBuffer lab = convert_colorspace(pixel(1, 1, 1), ColorSpace::RGB, ColorSpace::LAB);
  EXPECT_NEAR(lab.at(0, 0, 0), 1.0f, 1e-4);
  EXPECT_NEAR(lab.at(0, 0, 1), 128.0 / 255.0, 1e-3);
  EXPECT_NEAR(lab.at(0, 0, 2), 128.0 / 255.0, 1e-3);
}

TEST(ColorSpace, RoundTripWithinTwoLevels) {
  const ImageBuffer x = phantom::random_image(100, 100, 3, 21);
  for (ColorSpace cs : {ColorSpace::YCRCB, ColorSpace::LAB}) {
    const ImageBuffer back = convert_colorspace(convert_colorspace(x, ColorSpace::RGB, cs), cs, ColorSpace::RGB);
    EXPECT_LE(oracle::max_abs_diff(back, x), 2.0 / 255.0) << to_string(cs);
  }
}

TEST(ColorSpace, GrayRoundTripAndErrors) {
  const ImageBuffer x = phantom::random_image(8, 8, 3, 2);
  const ImageBuffer g = convert_colorspace(x, ColorSpace::RGB, ColorSpace::GRAY);
  EXPECT_EQ(g, to_grayscale(x));
  const ImageBuffer rgb = convert_colorspace(g, ColorSpace::GRAY, ColorSpace::RGB);
  EXPECT_EQ(extract_channel(rgb, 1), g);
  EXPECT_FUNDUS_ERROR(convert_colorspace(g, ColorSpace::RGB, ColorSpace::LAB), ErrorCode::UnsupportedConversion);
  EXPECT_FUNDUS_ERROR(convert_colorspace(x, ColorSpace::GRAY, ColorSpace::RGB), ErrorCode::UnsupportedConversion);
}

TEST(ColorSpace, OutputsStayInUnitRange) {
  const ImageBuffer x = phantom::random_image(50, 50, 3, 8);
  for (ColorSpace cs : {ColorSpace::YCRCB, ColorSpace::LAB, ColorSpace::GRAY}) {
    EXPECT_TRUE(all_finite_unit(convert_colorspace(x, ColorSpace::RGB, cs)));
  }
}

TEST(Resize, RetcamToNetworkInput) {
  const ImageBuffer out = resize_lanczos(ImageBuffer(640, 480, 3, 0.3f), 224, 224);
  EXPECT_EQ(out.width(), 224);
  EXPECT_EQ(out.height(), 224);
  EXPECT_EQ(out.channels(), 3);
}

TEST(Resize, IdentityScale) {
  const ImageBuffer x = phantom::random_image(37, 23, 3, 4);
  EXPECT_LE(oracle::max_abs_diff(resize_lanczos(x, 37, 23), x), 1.0 / 255.0);
}

TEST(Resize, ConstantPreserved) {
  for (auto [w, h] : {std::pair{7, 300}, std::pair{224, 224}, std::pair{1, 1}, std::pair{1000, 13}}) {
    const ImageBuffer out = resize_lanczos(ImageBuffer(64, 48, 1, 0.6f), w, h);
    for (float v : out.values()) ASSERT_NEAR(v, 0.6f, 1.0 / 255.0);
  }
}

TEST(Resize, RangeAndErrors) {
  // A hard checkerboard rings under Lanczos; output must still be clamped.
  ImageBuffer cb(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) cb.at(x, y) = ((x / 2 + y / 2) % 2) ? 1.0f : 0.0f;
  EXPECT_TRUE(all_finite_unit(resize_lanczos(cb, 77, 51)));
  EXPECT_FUNDUS_ERROR(resize_lanczos(cb, 0, 10), ErrorCode::ZeroDimension);
  EXPECT_FUNDUS_ERROR(resize_lanczos(cb, 10, 0), ErrorCode::ZeroDimension);
}

TEST(Roi, DiscWithBlackBorder) {
  ImageBuffer img(100, 80, 3, 0.0f);
  // Bright disc of radius 20 centred at (50, 40): bounding box [30,70] x [20,60].
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 100; ++x)
      if ((x - 50) * (x - 50) + (y - 40) * (y - 40) <= 400) img.at(x, y, 0) = 0.8f;
  const RoiCrop c = center_crop_roi(img);
  EXPECT_EQ(c.roi, (Roi{30, 20, 41, 41}));
  EXPECT_EQ(c.image.width(), 41);
  EXPECT_EQ(c.image.at(20, 20, 0), 0.8f);
}

TEST(Roi, FullyBrightIsIdentity) {
  const ImageBuffer img(40, 32, 3, 0.9f);
  const RoiCrop c = center_crop_roi(img);
  EXPECT_EQ(c.roi, (Roi{0, 0, 40, 32}));
  EXPECT_EQ(c.image, img);
}

TEST(Roi, Errors) {
  EXPECT_FUNDUS_ERROR(center_crop_roi(ImageBuffer(64, 64, 3, 0.0f)), ErrorCode::EmptyROI);
  EXPECT_FUNDUS_ERROR(center_crop_roi(ImageBuffer(31, 64, 3, 0.5f)), ErrorCode::ImageTooSmall);
}

TEST(Roi, ThresholdIsPerChannel) {
  ImageBuffer img(32, 32, 3, 0.0f);
  img.at(5, 7, 2) = 0.02f;  // only blue reaches the cutoff
  img.at(9, 9, 0) = 0.019f;
  const RoiCrop c = center_crop_roi(img);
  EXPECT_EQ(c.roi, (Roi{5, 7, 1, 1}));
}

TEST(Roi, CropPasteRoundTrip) {
  const ImageBuffer img = phantom::random_image(40, 40, 3, 9);
  const Roi r{3, 5, 10, 12};
  EXPECT_EQ(paste(img, crop(img, r), r), img);
  EXPECT_FUNDUS_ERROR(crop(img, Roi{35, 0, 10, 10}), ErrorCode::IndexOutOfRange);
}
