// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"
#include "adapts/pipeline.hpp"
#include "test_support.hpp"

namespace adapts {
namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  return cfg;
}

void expect_same_adapters(const AdapterSet& a, const AdapterSet& b) {
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.precision, b.precision);
  EXPECT_EQ(a.per_layer, b.per_layer);
}

class TinyDataset : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ToyDatasetOptions o;
    o.categories = 3;
    o.train_per_category = 4;
    o.test_per_class = 2;
    const auto layout = make_toy_dataset(testing::temp_dir("pipeline_toy"), o);
    data_ = new std::vector<CategoryData>(
        load_dataset(layout, toy_backbone_spec()));
  }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }
  const std::vector<CategoryData>& data() const { return *data_; }

  static std::vector<CategoryData>* data_;
};

std::vector<CategoryData>* TinyDataset::data_ = nullptr;

TEST(TrainConfigTest, JsonRoundTrip) {
  TrainConfig cfg;
  cfg.adapter = AdapterKind::bottleneck(0.25);
  cfg.adapter_layers = {1, 3};
  cfg.precision = Precision::kInt8;
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.smooth_sigma = 1.5;
  cfg.combine = Combine::kProduct;
  cfg.perlin.threshold = 0.6;
  const nlohmann::json j = to_json(cfg);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  EXPECT_EQ(to_json(train_config_from_json(nlohmann::json::object())),
            to_json(TrainConfig{}));
}

TEST(TrainConfigTest, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(train_config_from_json({{"epochz", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"perlin", {{"thresh", 0.2}}}}),
               ConfigError);
  EXPECT_THROW(train_config_from_json({{"epochs", "many"}}), ConfigError);
  EXPECT_THROW(train_config_from_json({{"adapter", "lora"}}), ConfigError);
  TrainConfig cfg;
  cfg.adapter_layers = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.adapter_layers = {4};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.anomaly_prob = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainConfigTest, ShippedToyConfigMatchesPreset) {
  const auto j = nlohmann::json::parse(
      read_text_file(std::filesystem::path(ADAPTS_SOURCE_DIR) / "configs" /
                     "toy.json"));
  EXPECT_EQ(to_json(train_config_from_json(j)), to_json(toy_train_config()));
  toy_train_config().validate();
}

TEST(TrainLogTest, CsvHeader) {
  TrainLogEntry e;
  e.epoch = 1;
  e.step = 3;
  e.loss = {1.0, 0.25, 0.5, 1.75};
  const std::string csv = train_log_csv({e});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,step,stfpm,focal,l1,total");
}

TEST(ScenarioTest, Names) {
  for (Scenario s : {Scenario::kSingle, Scenario::kMulticlass,
                     Scenario::kContinual}) {
    EXPECT_EQ(parse_scenario(scenario_name(s)), s);
  }
  EXPECT_THROW(parse_scenario("online"), ConfigError);
}

TEST_F(TinyDataset, TrainTaskIsDeterministicAndSeedSensitive) {
  const TrainConfig cfg = tiny_config();
  const Backbone backbone = make_backbone({cfg.backbone, cfg.backbone_seed});
  const auto& train = data()[0].train;
  const TaskModel a = train_task(backbone, train, cfg, 11);
  const TaskModel b = train_task(backbone, train, cfg, 11);
  const TaskModel c = train_task(backbone, train, cfg, 12);
  expect_same_adapters(a.adapters, b.adapters);
  EXPECT_EQ(a.prototype, b.prototype);
  EXPECT_NE(a.adapters.per_layer, c.adapters.per_layer);
  EXPECT_EQ(a.adapters.layers(), cfg.adapter_layers);
  ASSERT_EQ(a.log.size(), 4u);
  for (const auto& e : a.log) {
    EXPECT_TRUE(std::isfinite(e.loss.total));
    EXPECT_EQ(e.loss.total, e.loss.stfpm + e.loss.focal + e.loss.l1);
  }
  EXPECT_EQ(a.prototype, compute_prototype(backbone, train));
  EXPECT_THROW(train_task(backbone, {}, cfg, 1), DatasetError);
}

TEST(TrainTaskTest, StfpmTrendsDownOnToyCategory) {
  ToyDatasetOptions o;
  o.categories = 1;
  o.test_per_class = 1;
  const auto layout = make_toy_dataset(testing::temp_dir("pipeline_trend"), o);
  const CategoryData d = load_category(layout.categories[0], 64, 64);
  const TrainConfig cfg;
  const Backbone backbone = make_backbone({cfg.backbone, cfg.backbone_seed});
  const TaskModel m = train_task(backbone, d.train, cfg, task_seed(cfg, d.name));
  auto epoch_mean = [&](int epoch) {
    double sum = 0;
    int n = 0;
    for (const auto& e : m.log) {
      if (e.epoch != epoch) continue;
      EXPECT_TRUE(std::isfinite(e.loss.total));
      sum += e.loss.stfpm;
      ++n;
    }
    return sum / n;
  };
  const int first = m.log.front().epoch, last = m.log.back().epoch;
  EXPECT_EQ(last - first + 1, cfg.epochs);
  EXPECT_LT(epoch_mean(last), 0.5 * epoch_mean(first));
}

TEST_F(TinyDataset, TaskSeedDependsOnNameOnly) {
  const TrainConfig cfg = tiny_config();
  EXPECT_EQ(task_seed(cfg, "toy000"), task_seed(cfg, "toy000"));
  EXPECT_NE(task_seed(cfg, "toy000"), task_seed(cfg, "toy001"));
  TrainConfig other = cfg;
  other.seed = 1;
  EXPECT_NE(task_seed(cfg, "toy000"), task_seed(other, "toy000"));
}

TEST_F(TinyDataset, SingleRunBundleRoundTrip) {
  const TrainConfig cfg = tiny_config();
  const ScenarioResult r = run_single(data(), cfg);
  ASSERT_EQ(r.report.records.size(), 3u);
  EXPECT_FALSE(r.report.records[0].routing_accuracy.has_value());
  const auto dir = testing::temp_dir("bundle_rt");
  save_bundle(r.bundle, dir);
  const ModelBundle back = load_bundle(dir);
  EXPECT_EQ(back.scenario, Scenario::kSingle);
  EXPECT_EQ(back.store, r.bundle.store);
  ASSERT_EQ(back.adapters.size(), 3u);
  for (int t = 0; t < 3; ++t) expect_same_adapters(back.adapters[t], r.bundle.adapters[t]);
  const Backbone backbone = make_backbone(back.backbone);
  EXPECT_EQ(report_csv(evaluate_bundle(back, backbone, data())),
            report_csv(r.report));

  const auto dir2 = testing::temp_dir("bundle_rt2");
  save_bundle(back, dir2);
  for (const char* f : {"config.json", "tasks/toy001/manifest.json",
                        "tasks/toy001/tensors.bin", "prototypes/tensors.bin"}) {
    EXPECT_EQ(read_text_file(dir / f), read_text_file(dir2 / f)) << f;
  }
  EXPECT_THROW(load_bundle(testing::temp_dir("bundle_none")), LoadError);
}

TEST_F(TinyDataset, ParallelWorkersMatchSequential) {
  const TrainConfig cfg = tiny_config();
  RunOptions par;
  par.workers = 3;
  EXPECT_EQ(report_csv(run_single(data(), cfg, par).report),
            report_csv(run_single(data(), cfg).report));
}

TEST_F(TinyDataset, InferWithAndWithoutTask) {
  const TrainConfig cfg = tiny_config();
  const ScenarioResult r = run_multiclass(data(), cfg);
  const Backbone backbone = make_backbone(r.bundle.backbone);
  const Image& x = data()[1].test[0];
  const InferResult routed = infer(r.bundle, backbone, x);
  EXPECT_EQ(routed.distances.size(), 3u);
  const InferResult given = infer(r.bundle, backbone, x, routed.task);
  EXPECT_TRUE(given.distances.empty());
  EXPECT_EQ(given.map.map, routed.map.map);
  EXPECT_EQ(given.map.map.height(), 64);
  EXPECT_THROW(infer(r.bundle, backbone, x, 7), ConfigError);
  EXPECT_EQ(r.bundle.task_id("toy002"), 2);
  EXPECT_THROW(r.bundle.task_id("toy999"), ConfigError);
}

TEST_F(TinyDataset, ContinualEqualsMulticlassAndIsOrderInvariant) {
  const TrainConfig cfg = tiny_config();
  const ScenarioResult mc = run_multiclass(data(), cfg);
  std::vector<ModelBundle> prefixes;
  RunOptions opts;
  opts.on_task_done = [&](const ModelBundle& b) { prefixes.push_back(b); };
  const ScenarioResult cl =
      run_continual(data(), cfg, {"toy002", "toy000", "toy001"}, opts);
  const ScenarioResult cl2 =
      run_continual(data(), cfg, {"toy000", "toy001", "toy002"});
  EXPECT_EQ(report_csv(cl.report), report_csv(mc.report));
  EXPECT_EQ(report_csv(cl2.report), report_csv(mc.report));
  ASSERT_EQ(prefixes.size(), 3u);
  // Earlier tasks keep their adapters and prototypes after later training.
  for (std::size_t k = 0; k < prefixes.size(); ++k) {
    for (int t = 0; t < prefixes[k].num_tasks(); ++t) {
      const std::string& name = prefixes[k].store.names()[t];
      const int final_id = cl.bundle.task_id(name);
      expect_same_adapters(prefixes[k].adapters[t], cl.bundle.adapters[final_id]);
      expect_same_adapters(prefixes[k].adapters[t],
                           mc.bundle.adapters[mc.bundle.task_id(name)]);
    }
  }
  EXPECT_THROW(run_continual(data(), cfg, {"toy000", "toy001"}), ConfigError);
}

TEST_F(TinyDataset, QuantizedBundleIsSmallerAndStable) {
  const TrainConfig cfg = tiny_config();
  const ScenarioResult r = run_multiclass(data(), cfg);
  const ModelBundle q = quantize_bundle(r.bundle);
  const MemoryReport f32 = memory_report(r.bundle);
  const MemoryReport i8 = memory_report(q);
  EXPECT_LT(i8.additional_bytes, f32.additional_bytes);
  EXPECT_EQ(i8.backbone_bytes, f32.backbone_bytes);
  EXPECT_EQ(f32.breakdown.at("prototypes"), 3u * 64u * 4u);
  for (const auto& set : q.adapters) EXPECT_EQ(set.precision, Precision::kInt8);
  const ModelBundle qq = quantize_bundle(q);
  for (std::size_t t = 0; t < q.adapters.size(); ++t) {
    expect_same_adapters(qq.adapters[t], q.adapters[t]);
  }
  const MemoryReport single = memory_report(run_single(data(), cfg).bundle);
  EXPECT_EQ(single.breakdown.count("prototypes"), 0u);
}

}  // namespace
}  // namespace adapts
