// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gradient_oracle.hpp"

namespace adapts {
namespace {

constexpr double kTol = 1e-4;

TEST(GradientTest, EveryParameterMatchesCentralDifferences) {
  testing::GradientProblem pb({1, 2});
  auto adapters = pb.adapters;
  const LossBreakdown loss = compute_objective<double>(
      pb.backbone, adapters, pb.head, pb.images, pb.masks, {}, nullptr);
  ASSERT_TRUE(std::isfinite(loss.total));
  ASSERT_GT(loss.focal, 0.0);
  for (const auto& [name, err] : testing::gradient_errors(pb)) {
    EXPECT_LT(err, kTol) << name;
  }
}

TEST(GradientTest, EvalModeGradientsMatchToo) {
  testing::GradientProblem pb({2, 3});
  pb.options.bn_mode = BnMode::kEval;
  for (const auto& [name, err] : testing::gradient_errors(pb, 7)) {
    EXPECT_LT(err, kTol) << name;
  }
}

TEST(GradientTest, GradientReachesEarliestAdapter) {
  testing::GradientProblem pb({1});
  const auto g = pb.analytic();
  double norm = 0.0;
  for (double v : g.adapters.at(1).w1) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST(GradientTest, TrainModeUpdatesRunningStatistics) {
  testing::GradientProblem pb({1});
  auto adapters = pb.adapters;
  const auto before = adapters.at(1).bn_mean;
  compute_objective<double>(pb.backbone, adapters, pb.head, pb.images,
                            pb.masks, {}, nullptr);
  EXPECT_NE(adapters.at(1).bn_mean, before);
}

}  // namespace
}  // namespace adapts
