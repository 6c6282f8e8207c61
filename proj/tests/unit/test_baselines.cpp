#include <gtest/gtest.h>

#include <random>

#include "semi2i/baselines.hpp"
#include "semi2i/errors.hpp"
#include "support/test_support.hpp"

using namespace semi2i;
using semi2i::testing::random_raster;

namespace {

RasterImage pixels(std::initializer_list<std::array<double, 3>> px) {
  RasterImage img(1, static_cast<int>(px.size()), 3, ValueRange::kByte);
  int c = 0;
  for (const auto& p : px) {
    for (int ch = 0; ch < 3; ++ch) img.at(0, c, ch) = p[ch];
    ++c;
  }
  return img;
}

RasterImage gray_ramp(std::initializer_list<double> values) {
  RasterImage img(1, static_cast<int>(values.size()), 1, ValueRange::kByte);
  std::copy(values.begin(), values.end(), img.data.begin());
  return img;
}

}  // namespace

TEST(GrayWorld, GainsFromChannelMeans) {
  const RasterImage img = pixels({{90, 110, 130}, {110, 130, 150}});
  const auto g = gray_world_gains(img);
  EXPECT_DOUBLE_EQ(g[0], 1.2);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
  EXPECT_DOUBLE_EQ(g[2], 6.0 / 7.0);
}

TEST(GrayWorld, BalancedImageIsFixedPoint) {
  const RasterImage img = pixels({{10, 30, 20}, {30, 10, 20}, {20, 20, 20}});
  EXPECT_EQ(gray_world(img), img);
  std::mt19937_64 rng(1);
  const RasterImage r = random_raster(6, 6, 3, ValueRange::kSigned, rng);
  RasterImage shifted = r;
  for (auto& v : shifted.data) v = 0.2 * v + 0.5;  // positive, far enough from 1 that nothing clamps
  const RasterImage once = gray_world(shifted);
  const RasterImage twice = gray_world(once);
  for (std::size_t i = 0; i < once.data.size(); ++i) EXPECT_NEAR(twice.data[i], once.data[i], 1e-12);
}

TEST(GrayWorld, OutputMeansEqualWhenNothingClamps) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(60, 120);
  RasterImage img(8, 8, 3, ValueRange::kByte);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = u(rng) + 20 * static_cast<int>(i % 3);
  const auto g = gray_world_gains(img);
  RasterImage unrounded = img;
  for (std::size_t i = 0; i < img.data.size(); ++i) unrounded.data[i] *= g[i % 3];
  std::array<double, 3> m{};
  for (std::size_t i = 0; i < img.data.size(); ++i) m[i % 3] += unrounded.data[i] / 64.0;
  EXPECT_NEAR(m[0], m[1], 1e-9);
  EXPECT_NEAR(m[1], m[2], 1e-9);
  const RasterImage out = gray_world(img);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(out.data[i], unrounded.data[i], 0.5);
  EXPECT_EQ(out.height, 8);
  EXPECT_EQ(out.width, 8);
}

TEST(GrayWorld, ZeroChannelMeanIsDegenerate) {
  EXPECT_THROW(gray_world(pixels({{0, 10, 20}, {0, 30, 40}})), DegenerateInput);
}

TEST(HistogramMatch, IdentityWhenReferenceIsSource) {
  std::mt19937_64 rng(3);
  const RasterImage img = random_raster(12, 9, 3, ValueRange::kByte, rng);
  EXPECT_EQ(histogram_match(img, img), img);
}

TEST(HistogramMatch, ConstantSourceMapsToQuantileByHand) {
  // Reference 10, 20, 30, 40: any constant source has cdf 1 at its value, so
  // the smallest reference level with cdf >= 1 is 40.
  const RasterImage ref = gray_ramp({10, 20, 30, 40});
  const RasterImage out = histogram_match(gray_ramp({77, 77, 77}), ref);
  for (double v : out.data) EXPECT_EQ(v, 40.0);
  // Two source levels, half the mass each: the lower half lands on 20.
  const RasterImage two = histogram_match(gray_ramp({5, 5, 200, 200}), ref);
  EXPECT_EQ(two.data, (std::vector<double>{20, 20, 40, 40}));
}

TEST(HistogramMatch, LutIsMonotone) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    std::array<std::int64_t, 256> s{}, r{};
    std::uniform_int_distribution<int> u(0, 5);
    for (int i = 0; i < 256; ++i) {
      s[i] = u(rng);
      r[i] = u(rng) * u(rng);
    }
    s[0] += 1;
    r[255] += 1;
    const auto lut = match_lut(s, r);
    for (int i = 1; i < 256; ++i) ASSERT_LE(lut[i - 1], lut[i]);
  }
}

TEST(HistogramMatch, OutputFollowsReferenceDistribution) {
  std::mt19937_64 rng(5);
  const RasterImage src = random_raster(32, 32, 3, ValueRange::kByte, rng);
  RasterImage ref = random_raster(32, 32, 3, ValueRange::kByte, rng);
  for (auto& v : ref.data) v = std::floor(v / 4.0) + 100;  // narrow band
  const RasterImage out = histogram_match(src, ref);
  for (double v : out.data) {
    EXPECT_GE(v, 100.0);
    EXPECT_LE(v, 163.0);
  }
}

TEST(HistogramMatch, IdempotentWithinOneLevel) {
  std::mt19937_64 rng(6);
  const RasterImage src = random_raster(16, 16, 3, ValueRange::kByte, rng);
  RasterImage ref = random_raster(20, 20, 3, ValueRange::kByte, rng);
  for (auto& v : ref.data) v = std::round(255.0 * std::pow(v / 255.0, 2.0));
  const RasterImage once = histogram_match(src, ref);
  const RasterImage twice = histogram_match(once, ref);
  for (std::size_t i = 0; i < once.data.size(); ++i) EXPECT_LE(std::abs(twice.data[i] - once.data[i]), 1.0);
}

TEST(HistogramMatch, PooledReferenceEqualsSingleImageReference) {
  std::mt19937_64 rng(7);
  const RasterImage src = random_raster(8, 8, 3, ValueRange::kByte, rng);
  const RasterImage ref = random_raster(8, 8, 3, ValueRange::kByte, rng);
  EXPECT_EQ(histogram_match(src, ChannelHistograms::of(ref)), histogram_match(src, ref));
}

TEST(HistogramMatch, ChannelMismatchIsInvalidInput) {
  std::mt19937_64 rng(8);
  EXPECT_THROW(histogram_match(random_raster(4, 4, 3, ValueRange::kByte, rng),
                               random_raster(4, 4, 1, ValueRange::kByte, rng)),
               InvalidInput);
}
