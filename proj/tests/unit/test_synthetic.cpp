#include <gtest/gtest.h>

#include <cmath>

#include "semi2i/errors.hpp"
#include "semi2i/synthetic.hpp"

using namespace semi2i;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.n_images = 3;
  c.height = 64;
  c.width = 64;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Synthetic, FixedSeedIsBitIdentical) {
  const SyntheticDomains x = make_synthetic_domains(small(5)), y = make_synthetic_domains(small(5));
  ASSERT_EQ(x.a.size(), 3u);
  for (std::size_t i = 0; i < x.a.size(); ++i) {
    EXPECT_EQ(x.a[i].image, y.a[i].image);
    EXPECT_EQ(x.b[i].image, y.b[i].image);
    EXPECT_EQ(x.a[i].labels, y.a[i].labels);
  }
  const SyntheticDomains z = make_synthetic_domains(small(6));
  EXPECT_NE(x.a[0].image, z.a[0].image);
}

TEST(Synthetic, PairedScenesShareLabels) {
  const SyntheticDomains d = make_synthetic_domains(small(7));
  for (std::size_t i = 0; i < d.a.size(); ++i) {
    EXPECT_EQ(d.a[i].labels, d.b[i].labels);
    EXPECT_NE(d.a[i].image, d.b[i].image);
    d.a[i].image.validate();
    d.b[i].image.validate();
    d.a[i].labels.validate();
  }
}

TEST(Synthetic, AllClassesAppear) {
  const SyntheticDomains d = make_synthetic_domains(small(8));
  std::array<int, kNumClasses> seen{};
  for (const auto& s : d.a)
    for (auto id : s.labels.ids) ++seen[id];
  for (int c = 0; c < kNumClasses; ++c) EXPECT_GT(seen[c], 0) << "class " << c;
}

TEST(Synthetic, MeanGapExceedsThreshold) {
  const SyntheticDomains d = make_synthetic_domains(small(9));
  const auto ma = mean_color(d.a), mb = mean_color(d.b);
  double gap = 0.0;
  for (int c = 0; c < 3; ++c) gap += (ma[c] - mb[c]) * (ma[c] - mb[c]);
  EXPECT_NEAR(std::sqrt(gap), d.mean_gap, 1e-9);
  EXPECT_GT(d.mean_gap, SynthConfig{}.shift.min_mean_gap);
}

TEST(Synthetic, WeakShiftIsDegenerate) {
  SynthConfig c = small(10);
  for (auto& ch : c.shift.channels) ch = {1.0, 1.0, 0.0, false};
  EXPECT_THROW(make_synthetic_domains(c), DegenerateInput);
}

TEST(Synthetic, ShiftIsMonotonePerChannel) {
  for (const auto& ch : ShiftSpec{}.channels) {
    double prev = shift_value(0.0, ch);
    for (int v = 1; v < 256; ++v) {
      const double cur = shift_value(v, ch);
      EXPECT_GE(cur, prev);
      prev = cur;
    }
  }
}

TEST(Synthetic, InvalidConfigRejected) {
  SynthConfig c = small(1);
  c.n_images = 0;
  EXPECT_THROW(c.validate(), InvalidConfig);
}
