// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "adapts/errors.hpp"
#include "adapts/matching.hpp"
#include "adapts/seg_guidance.hpp"
#include "test_support.hpp"

namespace adapts {
namespace {

Field<double> field_of(std::initializer_list<double> v) {
  Field<double> f(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), f.data());
  return f;
}

Mask mask_of(std::initializer_list<int> v) {
  Mask m(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

double bce(double y, int m) {
  y = std::clamp(y, kProbClamp, 1 - kProbClamp);
  return -(m ? std::log(y) : std::log(1 - y));
}

TEST(SegForwardTest, SigmoidExamples) {
  const auto d = testing::random_tensor<double>({5, 3, 4}, 1);
  const SegHeadT<double> zero{std::vector<double>(5, 0.0), 0.0};
  for (double v : testing::copy_values(seg_forward(zero, d))) EXPECT_EQ(v, 0.5);
  const SegHeadT<double> biased{std::vector<double>(5, 0.3), 2.0};
  for (double v : testing::copy_values(seg_forward(biased, Tensor<double>(5, 3, 4)))) {
    EXPECT_NEAR(v, 0.8808, 1e-4);
  }
}

TEST(SegForwardTest, DoublingWeightsDoublesLogit) {
  const auto d = testing::random_tensor<double>({5, 3, 4}, 1);
  SegHeadT<double> h{{0.2, -0.1, 0.4, 0.05, -0.3}, 0.0};
  const auto y1 = seg_forward(h, d);
  for (double& w : h.w) w *= 2;
  const auto y2 = seg_forward(h, d);
  auto logit = [](double p) { return std::log(p / (1 - p)); };
  for (std::size_t i = 0; i < y1.size(); ++i) {
    EXPECT_NEAR(logit(y2.values()[i]), 2 * logit(y1.values()[i]), 1e-9);
    EXPECT_GT(y1.values()[i], 0.0);
    EXPECT_LT(y1.values()[i], 1.0);
  }
  EXPECT_THROW(seg_forward(h, Tensor<double>(4, 3, 4)), ShapeError);
}

TEST(SegForwardTest, InitHasNegativeBias) {
  const SegHead h = init_seg_head(112, 3);
  EXPECT_EQ(h.w.size(), 112u);
  EXPECT_LT(h.b, 0.0f);
  EXPECT_EQ(init_seg_head(112, 3).w, h.w);
}

TEST(DownsampleMaskTest, Examples) {
  Mask ones(8, 8, 1), zeros(8, 8, 0);
  for (auto v : testing::copy_values(downsample_mask(ones, 2, 4))) EXPECT_EQ(v, 1);
  for (auto v : testing::copy_values(downsample_mask(zeros, 3, 3))) EXPECT_EQ(v, 0);
  Mask block(2, 2, 0);
  block.at(0, 0) = 1;
  block.at(0, 1) = 1;
  EXPECT_EQ(downsample_mask(block, 1, 1).at(0, 0), 0);
  block.at(1, 0) = 1;
  EXPECT_EQ(downsample_mask(block, 1, 1).at(0, 0), 1);
}

TEST(FocalLossTest, HandExamples) {
  EXPECT_NEAR(focal_loss(field_of({0.5}), mask_of({1}), 2.0),
              -0.25 * std::log(0.5), 1e-12);
  EXPECT_LT(focal_loss(field_of({1.0, 0.0}), mask_of({1, 0}), 2.0), 1e-6);
}

TEST(FocalLossTest, GammaZeroIsBinaryCrossEntropy) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Field<double> y(3, 4);
    Mask m(3, 4);
    double expected = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      y.values()[i] = rng.uniform();
      m.values()[i] = rng.uniform() < 0.3;
      expected += bce(y.values()[i], m.values()[i]);
    }
    EXPECT_NEAR(focal_loss(y, m, 0.0), expected / y.size(), 1e-12);
  }
}

TEST(L1LossTest, HandExamples) {
  EXPECT_EQ(l1_loss(field_of({1.0, 0.0}), mask_of({1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(l1_loss(field_of({0.5}), mask_of({1})), 0.5);
  EXPECT_NEAR(l1_loss(field_of({0.2, 0.4}), mask_of({1, 0})), 0.6, 1e-12);
}

TEST(LossGradTest, MatchesFiniteDifferences) {
  Rng rng(8);
  Field<double> y(2, 3);
  Mask m(2, 3);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y.values()[i] = 0.05 + 0.9 * rng.uniform();
    m.values()[i] = i % 2;
  }
  const auto gf = focal_loss_grad(y, m, 2.0);
  const auto gl = l1_loss_grad(y, m);
  const double h = 1e-6;
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto up = y, dn = y;
    up.values()[i] += h;
    dn.values()[i] -= h;
    EXPECT_NEAR(gf.values()[i],
                (focal_loss(up, m, 2.0) - focal_loss(dn, m, 2.0)) / (2 * h), 1e-6);
    EXPECT_NEAR(gl.values()[i], (l1_loss(up, m) - l1_loss(dn, m)) / (2 * h), 1e-6);
  }
}

TEST(TotalLossTest, ComponentsSumAndCleanSample) {
  const FeaturePyramid<double> ft{
      {1, testing::random_tensor<double>({4, 8, 8}, 1)},
      {2, testing::random_tensor<double>({6, 4, 4}, 2)}};
  const SegHeadT<double> head{std::vector<double>(10, 0.0), -20.0};
  const LossBreakdown clean = total_loss(ft, ft, head, Mask(16, 16, 0), 2.0);
  EXPECT_EQ(clean.stfpm, 0.0);
  EXPECT_LT(clean.focal + clean.l1, 1e-6);
  EXPECT_EQ(clean.total, clean.stfpm + clean.focal + clean.l1);

  auto fs = ft;
  for (double& v : fs.at(2).values()) v = -v;
  Mask m(16, 16, 0);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) m.at(y, x) = 1;
  }
  const LossBreakdown lb = total_loss(ft, fs, head, m, 2.0);
  EXPECT_GT(lb.stfpm, 0.0);
  EXPECT_GT(lb.focal, 0.0);
  EXPECT_GT(lb.l1, 0.0);
  EXPECT_EQ(lb.total, lb.stfpm + lb.focal + lb.l1);
}

}  // namespace
}  // namespace adapts
