// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "adapts/errors.hpp"
#include "adapts/metrics.hpp"
#include "adapts/rng.hpp"
#include "metric_oracles.hpp"

namespace adapts {
namespace {

using Labels = std::vector<std::uint8_t>;
using Scores = std::vector<float>;

TEST(AurocTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(auroc(Scores{0.1f, 0.2f, 0.8f, 0.9f}, Labels{0, 0, 1, 1}),
                   1.0);
  EXPECT_DOUBLE_EQ(auroc(Scores{0.5f, 0.5f, 0.5f}, Labels{0, 1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(
      auroc(Scores{0.1f, 0.4f, 0.35f, 0.8f}, Labels{0, 0, 1, 1}), 0.75);
}

TEST(AurocTest, SingleClassThrows) {
  EXPECT_THROW(auroc(Scores{0.1f, 0.2f}, Labels{1, 1}), MetricError);
  EXPECT_THROW(auroc(Scores{0.1f, 0.2f}, Labels{0, 0}), MetricError);
}

TEST(AurocTest, ComplementSymmetry) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Scores s(30);
    Labels l(30), flipped(30);
    for (int i = 0; i < 30; ++i) {
      s[i] = static_cast<float>(rng.below(8));
      l[i] = i % 3 == 0;
      flipped[i] = !l[i];
    }
    EXPECT_NEAR(auroc(s, l), 1.0 - auroc(s, flipped), 1e-12);
  }
}

TEST(AveragePrecisionTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(average_precision(Scores{0.9f, 0.1f}, Labels{1, 0}), 1.0);
  EXPECT_NEAR(average_precision(Scores{0.9f, 0.8f, 0.7f}, Labels{1, 0, 1}),
              0.5 + 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(average_precision(Scores{0.3f, 0.1f, 0.7f}, Labels{1, 1, 1}),
                   1.0);
  EXPECT_THROW(average_precision(Scores{0.3f}, Labels{0}), MetricError);
}

TEST(BestF1Test, WorkedExamples) {
  EXPECT_DOUBLE_EQ(best_f1(Scores{0.9f, 0.8f, 0.1f}, Labels{1, 1, 0}), 1.0);
  EXPECT_NEAR(best_f1(Scores{0.9f, 0.8f, 0.7f}, Labels{1, 0, 1}), 0.8, 1e-12);
  for (int n = 2; n <= 10; ++n) {
    Scores s(n);
    Labels l(n, 0);
    for (int i = 0; i < n; ++i) s[i] = static_cast<float>(n - i);
    l[n - 1] = 1;
    EXPECT_NEAR(best_f1(s, l), 2.0 / (n + 1), 1e-12) << n;
  }
  EXPECT_THROW(best_f1(Scores{0.3f}, Labels{0}), MetricError);
}

TEST(MetricOracleTest, FiveHundredRandomInstances) {
  Rng rng(2024);
  int checked = 0;
  while (checked < 500) {
    const int n = 2 + static_cast<int>(rng.below(63));
    Scores s(n);
    Labels l(n);
    // Coarse scores force ties.
    const int levels = 1 + static_cast<int>(rng.below(20));
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<float>(rng.below(levels)) / levels;
      l[i] = rng.uniform() < 0.4;
    }
    const int pos = std::count(l.begin(), l.end(), 1);
    if (pos == 0 || pos == n) continue;
    ASSERT_NEAR(auroc(s, l), testing::brute_auroc(s, l), 1e-9);
    ASSERT_NEAR(average_precision(s, l), testing::brute_ap(s, l), 1e-9);
    ASSERT_NEAR(best_f1(s, l), testing::brute_f1(s, l), 1e-9);
    ++checked;
  }
}

TEST(MetricOracleTest, InvariantUnderMonotoneTransforms) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Scores s(40), t(40);
    Labels l(40);
    for (int i = 0; i < 40; ++i) {
      s[i] = static_cast<float>(rng.below(12)) / 12.0f;
      l[i] = i % 4 == 0;
      t[i] = std::exp(3.0f * s[i]) + 2.0f;
    }
    EXPECT_DOUBLE_EQ(auroc(s, l), auroc(t, l));
    EXPECT_DOUBLE_EQ(average_precision(s, l), average_precision(t, l));
    EXPECT_DOUBLE_EQ(best_f1(s, l), best_f1(t, l));
  }
}

TEST(EvaluateScoresTest, OracleMapsScorePerfectly) {
  std::vector<Mask> masks;
  std::vector<FloatField> maps;
  Scores image_scores;
  Labels labels;
  for (int i = 0; i < 4; ++i) {
    Mask m(8, 8);
    if (i % 2) m.at(2, 3) = m.at(2, 4) = 1;
    FloatField f(8, 8);
    for (std::size_t k = 0; k < m.size(); ++k) f.values()[k] = m.values()[k];
    masks.push_back(m);
    maps.push_back(f);
    image_scores.push_back(static_cast<float>(i % 2));
    labels.push_back(i % 2);
  }
  const MetricRecord r = evaluate_scores("c", image_scores, labels, maps, masks);
  EXPECT_EQ(r.n_images, 4);
  EXPECT_DOUBLE_EQ(r.i_roc, 1.0);
  EXPECT_DOUBLE_EQ(r.p_roc, 1.0);
  EXPECT_DOUBLE_EQ(r.ap, 1.0);
  EXPECT_DOUBLE_EQ(r.p_f1, 1.0);
}

TEST(EvaluateScoresTest, AllZeroScoresGiveHalf) {
  std::vector<Mask> masks(2, Mask(4, 4));
  masks[1].at(0, 0) = 1;
  std::vector<FloatField> maps(2, FloatField(4, 4));
  const MetricRecord r =
      evaluate_scores("c", Scores{0.0f, 0.0f}, Labels{0, 1}, maps, masks);
  EXPECT_DOUBLE_EQ(r.i_roc, 0.5);
  EXPECT_DOUBLE_EQ(r.p_roc, 0.5);
}

TEST(AggregateTest, MeansAndSingleRecord) {
  MetricRecord a{"a", 10, 1.0, 0.8, 0.5, 0.4, std::nullopt};
  MetricRecord b{"b", 20, 0.5, 0.6, 0.3, 0.2, std::nullopt};
  const MetricRecord one = aggregate_scenario({a});
  EXPECT_DOUBLE_EQ(one.i_roc, 1.0);
  EXPECT_DOUBLE_EQ(one.p_f1, 0.5);
  const MetricRecord m = aggregate_scenario({a, b});
  EXPECT_EQ(m.n_images, 30);
  EXPECT_DOUBLE_EQ(m.i_roc, 0.75);
  EXPECT_DOUBLE_EQ(m.p_roc, 0.7);
  EXPECT_FALSE(m.routing_accuracy.has_value());
  EXPECT_THROW(aggregate_scenario({}), MetricError);
}

TEST(ReportTest, CsvHasOneRowPerCategoryPlusMean) {
  MetricRecord a{"zeta", 10, 1.0, 0.8, 0.5, 0.4, 1.0};
  MetricRecord b{"alpha", 20, 0.5, 0.6, 0.3, 0.2, 0.5};
  const ScenarioReport r = make_report({a, b});
  EXPECT_EQ(r.records.front().category, "alpha");
  const std::string csv = report_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("mean,30,0.750000,0.700000,0.400000,0.300000,0.750000"),
            std::string::npos);
  EXPECT_EQ(report_json(r)["categories"].size(), 2u);
}

TEST(MemoryReportTest, PlannedScenarios) {
  const BackboneSpec wrn = wide_resnet50_2_spec();
  // Single task, linear adapters at stages 2 and 3, no router.
  const MemoryReport l1 = plan_memory_report(wrn, AdapterKind::linear(), {2, 3},
                                             Precision::kF32, 1, false);
  EXPECT_EQ(format_mib(l1.additional_bytes), "10.03");
  EXPECT_EQ(l1.total_bytes, l1.backbone_bytes + l1.additional_bytes);
  const MemoryReport l15 = plan_memory_report(
      wrn, AdapterKind::linear(), {2, 3}, Precision::kF32, 15, true);
  EXPECT_NEAR(to_mib(l15.additional_bytes), 150.0, 7.5);
  EXPECT_EQ(l15.breakdown.at("prototypes"), 15u * 2048u * 4u);
  const MemoryReport s15 = plan_memory_report(wrn, AdapterKind::linear(), {2},
                                              Precision::kInt8, 15, true);
  EXPECT_NEAR(to_mib(s15.additional_bytes), 8.0, 0.4);
  EXPECT_THROW(plan_memory_report(wrn, AdapterKind::linear(), {7},
                                  Precision::kF32, 1, false),
               ConfigError);
}

}  // namespace
}  // namespace adapts
