// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "adapts/errors.hpp"
#include "adapts/synth_anomaly.hpp"
#include "test_support.hpp"

namespace adapts {
namespace {

TEST(PerlinTest, ZeroOnLatticePoints) {
  const FloatField f = perlin_noise(64, 32, {4, 2}, 11);
  for (int y = 0; y < 64; y += 16) {
    for (int x = 0; x < 32; x += 16) EXPECT_EQ(f.at(y, x), 0.0f) << y << "," << x;
  }
}

TEST(PerlinTest, Deterministic) {
  EXPECT_EQ(perlin_noise(32, 32, {4, 4}, 3), perlin_noise(32, 32, {4, 4}, 3));
  EXPECT_NE(perlin_noise(32, 32, {4, 4}, 3), perlin_noise(32, 32, {4, 4}, 4));
}

TEST(PerlinTest, RangeOverManySeeds) {
  const std::pair<int, int> resolutions[] = {{2, 2}, {4, 8}, {16, 16}, {1, 32}};
  for (int seed = 0; seed < 1000; ++seed) {
    const FloatField f = perlin_noise(32, 32, resolutions[seed % 4], seed);
    const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
    ASSERT_GE(*lo, -1.0f);
    ASSERT_LE(*hi, 1.0f);
  }
}

TEST(PerlinTest, NonDividingResolutionThrows) {
  EXPECT_THROW(perlin_noise(30, 32, {4, 4}, 1), ConfigError);
}

TEST(FractalPerlinTest, NormalizedToUnitRange) {
  for (int octaves : {1, 3}) {
    const FloatField f = fractal_perlin(64, 64, {2, 4}, octaves, 0.5, 9);
    const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
    EXPECT_EQ(*lo, 0.0f);
    EXPECT_EQ(*hi, 1.0f);
  }
  EXPECT_NO_THROW(fractal_perlin(32, 32, {16, 16}, 2, 0.5, 1));
  EXPECT_THROW(fractal_perlin(32, 32, {16, 16}, 3, 0.5, 1), ConfigError);
}

TEST(FractalPerlinTest, SingleOctaveIgnoresPersistence) {
  EXPECT_EQ(fractal_perlin(32, 32, {4, 4}, 1, 0.1, 5),
            fractal_perlin(32, 32, {4, 4}, 1, 0.9, 5));
}

TEST(MakeMaskTest, PointwiseThreshold) {
  FloatField f(1, 3);
  f.at(0, 0) = 0.2f;
  f.at(0, 1) = 0.6f;
  f.at(0, 2) = 0.8f;
  const Mask m = make_mask(f, 0.5);
  EXPECT_EQ(m.at(0, 0), 0);
  EXPECT_EQ(m.at(0, 1), 1);
  EXPECT_EQ(m.at(0, 2), 1);
  FloatField pos(4, 4, 0.3f);
  const Mask all = make_mask(pos, 0.0);
  EXPECT_TRUE(std::all_of(all.values().begin(), all.values().end(),
                          [](auto v) { return v == 1; }));
  const Mask none = make_mask(pos, 1.0);
  EXPECT_TRUE(std::all_of(none.values().begin(), none.values().end(),
                          [](auto v) { return v == 0; }));
}

TEST(SampleMaskTest, NonEmptyAndBoundedCoverage) {
  PerlinConfig cfg;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Mask m = sample_mask(64, 64, cfg, rng);
    const auto on = std::count(m.values().begin(), m.values().end(), 1);
    ASSERT_GT(on, 0);
    ASSERT_LE(on, 0.9 * 64 * 64);
  }
}

TEST(SynthesizeAnomalyTest, BlendIdentities) {
  const Image x = testing::random_image(8, 8, 1);
  const Image t = testing::random_image(8, 8, 2);
  const Mask none(8, 8);
  EXPECT_EQ(synthesize_anomaly(x, t, none, 0.7).image, x);
  const Mask all(8, 8, 1);
  EXPECT_EQ(synthesize_anomaly(x, t, all, 1.0).image, t);

  Image zero(3, 4, 4);
  Image one(3, 4, 4, 1.0f);
  Mask half(4, 4);
  half.at(1, 1) = 1;
  const SyntheticSample s = synthesize_anomaly(zero, one, half, 0.5);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(s.image.at(c, 1, 1), 0.5f);
    EXPECT_EQ(s.image.at(c, 0, 0), 0.0f);
  }
  EXPECT_THROW(synthesize_anomaly(x, Image(3, 4, 4), none, 0.5), ShapeError);
}

TEST(SynthesizeAnomalyTest, OffMaskPixelsUntouchedForAnyBeta) {
  PerlinConfig cfg;
  const Image x = testing::random_image(32, 32, 5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticSample s = synthesize(x, cfg, {}, seed);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 32; ++y) {
        for (int xx = 0; xx < 32; ++xx) {
          const float v = s.image.at(c, y, xx);
          ASSERT_GE(v, 0.0f);
          ASSERT_LE(v, 1.0f);
          if (!s.mask.at(y, xx)) ASSERT_EQ(v, x.at(c, y, xx));
        }
      }
    }
  }
}

TEST(SynthesizeTest, PureFunctionOfInputs) {
  PerlinConfig cfg;
  const Image x = testing::random_image(32, 32, 6);
  const SyntheticSample a = synthesize(x, cfg, {}, 42);
  const SyntheticSample b = synthesize(x, cfg, {}, 42);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
}

TEST(TextureTest, SelfAugmentOfConstantIsConstant) {
  Rng rng(1);
  const Image flat(3, 16, 16, 0.4f);
  const Image t = self_augment(flat, rng);
  for (int c = 0; c < 3; ++c) {
    const auto p = t.plane(c);
    EXPECT_TRUE(std::all_of(p.begin(), p.end(), [&](float v) { return v == p[0]; }));
  }
}

TEST(TextureTest, BankSelection) {
  TextureSource src;
  src.use_bank = true;
  Rng rng(3);
  const Image x = testing::random_image(8, 8, 1);
  EXPECT_THROW(sample_texture(src, x, rng), ConfigError);
  src.bank.push_back(testing::random_image(8, 8, 2));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(sample_texture(src, x, rng), src.bank[0]);
  src.bank.push_back(testing::random_image(8, 8, 3));
  Rng r1(10), r2(10);
  EXPECT_EQ(sample_texture(src, x, r1), sample_texture(src, x, r2));
}

TEST(PerlinConfigTest, Validation) {
  PerlinConfig cfg;
  cfg.beta_min = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.threshold = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.octaves = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace adapts
