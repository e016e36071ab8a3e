// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Per-task adapter training, inference, model bundles, and the single,
// multi-class and continual scenarios.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/dataset.hpp"
#include "adapts/matching.hpp"
#include "adapts/metrics.hpp"
#include "adapts/seg_guidance.hpp"
#include "adapts/synth_anomaly.hpp"
#include "adapts/task_router.hpp"

namespace adapts {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  std::string backbone = "toy";
  std::uint64_t backbone_seed = 0;
  AdapterKind adapter = AdapterKind::linear();
  std::set<int> adapter_layers{2, 3};
  Precision precision = Precision::kF32;
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  double gamma = kDefaultFocalGamma;
  double anomaly_prob = 0.5;
  double smooth_sigma = 4.0;
  Combine combine = Combine::kSum;
  PerlinConfig perlin;
  std::string texture_dir;  // empty: self-augmented textures

  // Throws ConfigError.
  void validate() const;
};

// Settings used for the 64x64 toy benchmark: adapters on every tap, 40
// epochs, and a 1-pixel smoothing kernel suited to the small input. Also
// shipped as configs/toy.json.
TrainConfig toy_train_config();

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys throw ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainLogEntry {
  int epoch = 0;
  int step = 0;
  LossBreakdown loss;
};

std::string train_log_csv(const std::vector<TrainLogEntry>& log);

struct TaskModel {
  AdapterSet adapters;
  std::vector<float> prototype;
  std::vector<TrainLogEntry> log;
};

// Trains adapters plus a throwaway segmentation head on normal images with
// synthetic anomalies; the backbone is frozen. Deterministic in
// (images, cfg, task_seed). Throws DivergenceError on a non-finite loss.
TaskModel train_task(const Backbone& backbone, const std::vector<Image>& train,
                     const TrainConfig& cfg, std::uint64_t task_seed,
                     const TextureSource& textures = {});

// Seed of a task, keyed by category name so that ordering cannot matter.
std::uint64_t task_seed(const TrainConfig& cfg, const std::string& category);

enum class Scenario { kSingle, kMulticlass, kContinual };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& s);

struct BackboneRef {
  std::string spec;
  std::uint64_t seed = 0;
};

struct ModelBundle {
  TrainConfig config;
  Scenario scenario = Scenario::kSingle;
  BackboneRef backbone;
  std::vector<AdapterSet> adapters;  // indexed by task id
  PrototypeStore store;              // names define the task ids

  int num_tasks() const { return store.size(); }
  // Throws ConfigError for an unknown name.
  int task_id(const std::string& name) const;
  // Routed scenarios count the prototype store as additional memory.
  bool routed() const { return scenario != Scenario::kSingle; }
};

Backbone make_backbone(const BackboneRef& ref);

// Layout: config.json, tasks/<name>/ (adapter container), prototypes/.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

// Returns a copy with every adapter set quantized to int8.
ModelBundle quantize_bundle(const ModelBundle& bundle);

MemoryReport memory_report(const ModelBundle& bundle);

struct InferResult {
  int task = 0;
  std::vector<double> distances;  // empty when the task was given
  AnomalyMap map;
};

// Routes by nearest prototype unless `task` is given.
InferResult infer(const ModelBundle& bundle, const Backbone& backbone,
                  const Image& image, std::optional<int> task = std::nullopt);

// Scores one category's test split. Routed bundles identify the task of
// every image and score it with the routed adapters.
MetricRecord evaluate_category(const ModelBundle& bundle,
                               const Backbone& backbone,
                               const CategoryData& data);

ScenarioReport evaluate_bundle(const ModelBundle& bundle,
                               const Backbone& backbone,
                               const std::vector<CategoryData>& data);

struct ScenarioResult {
  ModelBundle bundle;
  ScenarioReport report;
  std::vector<std::vector<TrainLogEntry>> logs;  // by task id
};

struct RunOptions {
  int workers = 1;
  TextureSource textures;
  // Continual only: called after each task with the bundle so far.
  std::function<void(const ModelBundle&)> on_task_done;
};

std::vector<CategoryData> load_dataset(const DatasetLayout& layout,
                                       const BackboneSpec& spec);

ScenarioResult run_single(const std::vector<CategoryData>& data,
                          const TrainConfig& cfg, const RunOptions& opts = {});
ScenarioResult run_multiclass(const std::vector<CategoryData>& data,
                              const TrainConfig& cfg,
                              const RunOptions& opts = {});
// `order` is a permutation of the category names.
ScenarioResult run_continual(const std::vector<CategoryData>& data,
                             const TrainConfig& cfg,
                             const std::vector<std::string>& order,
                             const RunOptions& opts = {});

}  // namespace adapts
