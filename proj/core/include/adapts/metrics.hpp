// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Rank metrics (AUROC, average precision, best F1), per-category evaluation,
// scenario aggregation, memory reports, and CSV/JSON report writers.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/tensor.hpp"

namespace adapts {

// Mann-Whitney AUROC with ties counted as 1/2. Throws MetricError unless
// both classes are present.
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

// Step-wise sum of (R_k - R_{k-1}) * P_k over distinct score thresholds,
// highest first. Throws MetricError without positives.
double average_precision(std::span<const float> scores,
                         std::span<const std::uint8_t> labels);

// Max F1 over distinct score thresholds. Throws MetricError without
// positives.
double best_f1(std::span<const float> scores,
               std::span<const std::uint8_t> labels);

struct MetricRecord {
  std::string category;
  int n_images = 0;
  double i_roc = 0.0;
  double p_roc = 0.0;
  double p_f1 = 0.0;
  double ap = 0.0;
  // Fraction of test images routed to their own task (routed scenarios).
  std::optional<double> routing_accuracy;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

// Image scores give I-ROC; pixels pooled over all images give P-ROC, P-F1
// and AP. Maps and masks must have matching sizes.
MetricRecord evaluate_scores(const std::string& category,
                             const std::vector<float>& image_scores,
                             const std::vector<std::uint8_t>& image_labels,
                             const std::vector<FloatField>& maps,
                             const std::vector<Mask>& masks);

// Unweighted means; n_images is summed. Throws MetricError when empty.
MetricRecord aggregate_scenario(const std::vector<MetricRecord>& records);

struct MemoryReport {
  std::uint64_t backbone_bytes = 0;
  std::uint64_t additional_bytes = 0;
  std::uint64_t total_bytes = 0;
  std::map<std::string, std::uint64_t> breakdown;  // adapter/prototype parts
};

// total = backbone + additional, additional = sum of the breakdown.
MemoryReport make_memory_report(std::uint64_t backbone_bytes,
                                std::map<std::string, std::uint64_t> breakdown);

// f32 bytes of the frozen backbone weights described by `spec`.
std::uint64_t backbone_memory_bytes(const BackboneSpec& spec);

// Memory of a K-task deployment planned from channel counts alone: one
// adapter set per task at `layers` plus a K x embed_dim f32 prototype store
// when `with_router`.
MemoryReport plan_memory_report(const BackboneSpec& spec,
                                const AdapterKind& kind,
                                const std::set<int>& layers,
                                Precision precision, int num_tasks,
                                bool with_router);

std::string memory_report_text(const MemoryReport& report);
nlohmann::json memory_report_json(const MemoryReport& report);

struct ScenarioReport {
  std::vector<MetricRecord> records;  // sorted by category
  MetricRecord aggregate;

  friend bool operator==(const ScenarioReport&,
                         const ScenarioReport&) = default;
};

// Sorts records by category and computes the aggregate row.
ScenarioReport make_report(std::vector<MetricRecord> records);

// One row per category plus a final "mean" row; fixed 6-digit formatting.
std::string report_csv(const ScenarioReport& report);
nlohmann::json report_json(const ScenarioReport& report);

}  // namespace adapts
