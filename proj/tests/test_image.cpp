#include <gtest/gtest.h>

#include <set>

#include "rainsr/error.hpp"
#include "rainsr/image.hpp"
#include "rainsr/image_io.hpp"
#include "support.hpp"

using namespace rainsr;
using rainsr::testing::random_image;
using rainsr::testing::TempDir;

TEST(Image, ValidateRejectsOutOfRange) {
  Image img(2, 2, 0.5f);
  EXPECT_NO_THROW(img.validate());
  img.at(1, 1, 2) = 1.5f;
  EXPECT_THROW(img.validate(), RangeError);
  img.at(1, 1, 2) = std::nanf("");
  EXPECT_THROW(img.validate(), RangeError);
  EXPECT_THROW(Image(0, 3), DimensionError);
}

TEST(CropToMultiple, Examples) {
  const Image img = random_image(65, 67, 1);
  const Image c = crop_to_multiple(img, 4);
  EXPECT_EQ(c.height, 64);
  EXPECT_EQ(c.width, 64);
  for (int y = 0; y < 64; y += 7) {
    for (int x = 0; x < 64; x += 5) EXPECT_EQ(c.at(y, x, 1), img.at(y, x, 1));
  }
  const Image sq = random_image(64, 64, 2);
  EXPECT_EQ(crop_to_multiple(sq, 4), sq);
  EXPECT_THROW(crop_to_multiple(Image(3, 9), 4), DimensionError);
}

TEST(ExtractPatches, WholeImageWhenPatchMatches) {
  const Image img = random_image(16, 16, 3);
  const auto p = extract_patches(img, {16, 1, 99});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], img);
}

TEST(ExtractPatches, Deterministic) {
  const Image img = random_image(20, 24, 4);
  EXPECT_EQ(extract_patches(img, {8, 10, 5}), extract_patches(img, {8, 10, 5}));
  EXPECT_NE(extract_patches(img, {8, 10, 5}), extract_patches(img, {8, 10, 6}));
}

// 1000 uniform draws with replacement over 625 positions cover 1 - e^-1.6,
// about 79.8%, of the grid in expectation (sd about 1%). 3000 draws cover
// 99.2%.
TEST(ExtractPatches, CoordinatesCoverValidGrid) {
  const auto many = sample_patch_origins(32, 32, {8, 3000, 123});
  const std::set<std::pair<int, int>> many_seen(many.begin(), many.end());
  EXPECT_GE(many_seen.size(), static_cast<std::size_t>(0.9 * 625));
  const auto origins = sample_patch_origins(32, 32, {8, 1000, 123});
  ASSERT_EQ(origins.size(), 1000u);
  std::set<std::pair<int, int>> seen;
  for (auto [y, x] : origins) {
    ASSERT_GE(y, 0);
    ASSERT_GE(x, 0);
    ASSERT_LE(y + 8, 32);
    ASSERT_LE(x + 8, 32);
    seen.insert({y, x});
  }
  EXPECT_GE(seen.size(), static_cast<std::size_t>(0.75 * 625));
}

TEST(ExtractPatches, PatchContentMatchesOrigin) {
  const Image img = random_image(12, 10, 8);
  const PatchSampleSpec spec{4, 6, 77};
  const auto origins = sample_patch_origins(12, 10, spec);
  const auto patches = extract_patches(img, spec);
  for (std::size_t k = 0; k < patches.size(); ++k) {
    EXPECT_EQ(patches[k], crop(img, origins[k].first, origins[k].second, 4, 4));
  }
}

TEST(ExtractPatches, OversizedPatchThrows) {
  EXPECT_THROW(extract_patches(Image(8, 8), {9, 1, 0}), DimensionError);
}

TEST(ModelRange, ScalarEndpointsAndClamp) {
  EXPECT_EQ(to_model_range(0.0), -1.0);
  EXPECT_EQ(to_model_range(1.0), 1.0);
  EXPECT_EQ(to_model_range(0.5), 0.0);
  EXPECT_EQ(from_model_range(1.7), 1.0);
  EXPECT_EQ(from_model_range(-3.0), 0.0);
  EXPECT_THROW(to_model_range(1.2), RangeError);
  // 2v - 1 rounds to the spacing of values near 1, so the way back is exact
  // only up to half an ulp of 1.
  for (int i = 0; i <= 255; ++i) {
    const double v = i / 255.0;
    EXPECT_NEAR(from_model_range(to_model_range(v)), v, 0x1p-53);
  }
  for (double v : {0.0, 0.25, 0.5, 0.75, 1.0}) EXPECT_EQ(from_model_range(to_model_range(v)), v);
}

TEST(ModelRange, ImageRoundTrip) {
  const Image img = random_image(6, 5, 10);
  const Tensor<float> t = to_model_range(img);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 6, 5}));
  EXPECT_FLOAT_EQ(t.at(0, 2, 3, 4), 2.0f * img.at(3, 4, 2) - 1.0f);
  const Image back = from_model_range(t);
  // Float arithmetic may move small values by half an ulp of 1.0.
  EXPECT_LE(max_abs_diff(back, img), 0x1p-24);
  Image q(4, 4);
  for (std::size_t i = 0; i < q.size(); ++i) q.data[i] = static_cast<float>((i * 37 % 256) / 255.0);
  EXPECT_LE(max_abs_diff(from_model_range(to_model_range(q)), q), 0x1p-24);
}

TEST(ModelRange, FromModelRangeClampsAndMapsNaNToZero) {
  Tensor<float> t({1, 3, 1, 2}, 0.0f);
  t[0] = 5.0f;
  t[1] = -5.0f;
  t[2] = std::nanf("");
  const Image img = from_model_range(t);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(0, 1, 0), 0.0f);
  EXPECT_EQ(img.at(0, 0, 1), 0.0f);
  EXPECT_EQ(img.at(0, 1, 1), 0.5f);
}

TEST(ImageIo, PngRoundTripIsQuantizedExactly) {
  TempDir dir("png");
  const Image img = random_image(9, 13, 11);
  write_png(dir / "a.png", img);
  const Image back = read_image(dir / "a.png");
  ASSERT_EQ(back.height, 9);
  ASSERT_EQ(back.width, 13);
  EXPECT_EQ(back, quantize8(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_LE(std::abs(back.data[i] - img.data[i]), 0.5 / 255.0 + 1e-7);
  }
  // A quantized image survives a second round trip bit-exactly.
  write_png(dir / "b.png", back);
  EXPECT_EQ(read_image(dir / "b.png"), back);
}

TEST(ImageIo, GarbageIsRejected) {
  TempDir dir("png");
  {
    std::FILE* f = std::fopen((dir / "x.png").c_str(), "wb");
    std::fputs("not an image", f);
    std::fclose(f);
  }
  EXPECT_THROW(read_image(dir / "x.png"), IoError);
  EXPECT_THROW(read_image(dir / "missing.png"), IoError);
}
