// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"
#include "adapts/image_io.hpp"
#include "adapts/objective.hpp"
#include "adapts/quantizer.hpp"
#include "adapts/rng.hpp"
#include "adapts/seg_guidance.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adapts {

// --- Config --------------------------------------------------------------

void TrainConfig::validate() const {
  const BackboneSpec spec = backbone_spec_by_name(backbone);
  if (adapter_layers.empty()) throw ConfigError("adapter_layers is empty");
  for (int layer : adapter_layers) {
    if (!spec.is_tap(layer)) {
      throw ConfigError("adapter layer " + std::to_string(layer) +
                        " is not a feature tap of backbone '" + backbone + "'");
    }
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(anomaly_prob >= 0.0 && anomaly_prob <= 1.0)) {
    throw ConfigError("anomaly_prob must be in [0,1]");
  }
  if (!(smooth_sigma >= 0.0)) throw ConfigError("smooth_sigma must be >= 0");
  perlin.validate();
}

namespace {

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

json perlin_json(const PerlinConfig& p) {
  return {{"min_scale_exp", p.min_scale_exp},
          {"max_scale_exp", p.max_scale_exp},
          {"octaves", p.octaves},
          {"persistence", p.persistence},
          {"threshold", p.threshold},
          {"beta_min", p.beta_min},
          {"beta_max", p.beta_max},
          {"rotation", p.rotation},
          {"max_coverage", p.max_coverage},
          {"max_attempts", p.max_attempts}};
}

void reject_unknown(const json& j, const json& known, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key '" + ctx + key + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const TrainConfig& cfg) {
  return {{"backbone", cfg.backbone},
          {"backbone_seed", cfg.backbone_seed},
          {"adapter", cfg.adapter.name()},
          {"adapter_layers", cfg.adapter_layers},
          {"precision", precision_name(cfg.precision)},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"optimizer", optimizer_name(cfg.optimizer)},
          {"seed", cfg.seed},
          {"gamma", cfg.gamma},
          {"anomaly_prob", cfg.anomaly_prob},
          {"smooth_sigma", cfg.smooth_sigma},
          {"combine", combine_name(cfg.combine)},
          {"perlin", perlin_json(cfg.perlin)},
          {"texture_dir", cfg.texture_dir}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  reject_unknown(j, to_json(cfg), "");
  read_key(j, "backbone", cfg.backbone);
  read_key(j, "backbone_seed", cfg.backbone_seed);
  std::string s;
  if (j.contains("adapter")) {
    read_key(j, "adapter", s);
    cfg.adapter = AdapterKind::parse(s);
  }
  read_key(j, "adapter_layers", cfg.adapter_layers);
  if (j.contains("precision")) {
    read_key(j, "precision", s);
    cfg.precision = parse_precision(s);
  }
  read_key(j, "epochs", cfg.epochs);
  read_key(j, "batch_size", cfg.batch_size);
  read_key(j, "learning_rate", cfg.learning_rate);
  if (j.contains("optimizer")) {
    read_key(j, "optimizer", s);
    cfg.optimizer = parse_optimizer(s);
  }
  read_key(j, "seed", cfg.seed);
  read_key(j, "gamma", cfg.gamma);
  read_key(j, "anomaly_prob", cfg.anomaly_prob);
  read_key(j, "smooth_sigma", cfg.smooth_sigma);
  if (j.contains("combine")) {
    read_key(j, "combine", s);
    cfg.combine = parse_combine(s);
  }
  if (j.contains("perlin")) {
    const json& p = j.at("perlin");
    reject_unknown(p, perlin_json(cfg.perlin), "perlin.");
    read_key(p, "min_scale_exp", cfg.perlin.min_scale_exp);
    read_key(p, "max_scale_exp", cfg.perlin.max_scale_exp);
    read_key(p, "octaves", cfg.perlin.octaves);
    read_key(p, "persistence", cfg.perlin.persistence);
    read_key(p, "threshold", cfg.perlin.threshold);
    read_key(p, "beta_min", cfg.perlin.beta_min);
    read_key(p, "beta_max", cfg.perlin.beta_max);
    read_key(p, "rotation", cfg.perlin.rotation);
    read_key(p, "max_coverage", cfg.perlin.max_coverage);
    read_key(p, "max_attempts", cfg.perlin.max_attempts);
  }
  read_key(j, "texture_dir", cfg.texture_dir);
  cfg.validate();
  return cfg;
}

// --- Training ------------------------------------------------------------

std::string train_log_csv(const std::vector<TrainLogEntry>& log) {
  std::string out = "epoch,step,stfpm,focal,l1,total\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                  e.step, e.loss.stfpm, e.loss.focal, e.loss.l1, e.loss.total);
    out += buf;
  }
  return out;
}

namespace {

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void begin_step() {
    ++t_;
    slot_ = 0;
  }

  // Slots are assigned in call order, which must be the same every step.
  void update(std::vector<float>& p, const std::vector<float>& g) {
    update(std::span<float>(p), std::span<const float>(g));
  }
  void update(std::span<float> p, std::span<const float> g) {
    if (slot_ == m_.size()) {
      m_.emplace_back(p.size(), 0.0f);
      v_.emplace_back(p.size(), 0.0f);
    }
    auto& m = m_[slot_];
    auto& v = v_[slot_];
    ++slot_;
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = kMomentum * m[i] + g[i];
        p[i] -= static_cast<float>(lr_) * m[i];
      }
      return;
    }
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = static_cast<float>(kBeta1 * m[i] + (1.0 - kBeta1) * g[i]);
      v[i] = static_cast<float>(kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i]);
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + kEps));
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  static constexpr float kMomentum = 0.9f;

  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  std::size_t slot_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace

TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.adapter_layers = {1, 2, 3};
  cfg.epochs = 40;
  cfg.smooth_sigma = 1.0;
  return cfg;
}

std::uint64_t task_seed(const TrainConfig& cfg, const std::string& category) {
  return derive_seed(cfg.seed, category);
}

TaskModel train_task(const Backbone& backbone, const std::vector<Image>& train,
                     const TrainConfig& cfg, std::uint64_t seed,
                     const TextureSource& textures) {
  cfg.validate();
  if (train.empty()) throw DatasetError("train_task: empty training set");
  const BackboneSpec& spec = backbone.spec();
  std::map<int, int> layer_channels;
  for (int layer : cfg.adapter_layers) {
    if (!spec.is_tap(layer)) {
      throw ConfigError("adapter layer " + std::to_string(layer) +
                        " is not a tap of the backbone");
    }
    layer_channels[layer] = spec.channels(layer);
  }
  int diff_channels = 0;
  for (int tap : spec.tap_layers) diff_channels += spec.channels(tap);

  TaskModel model;
  model.adapters = init_adapter_set(cfg.adapter, layer_channels,
                                    derive_seed(seed, "adapters"));
  SegHead head = init_seg_head(diff_channels, derive_seed(seed, "head"));
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  Rng rng(derive_seed(seed, "batches"));
  const ObjectiveOptions objective{cfg.gamma, BnMode::kTrain};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(i + 1)]);
    }
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> images;
      std::vector<Mask> masks;
      for (std::size_t k = start; k < end; ++k) {
        const Image& x = train[order[k]];
        if (rng.uniform() < cfg.anomaly_prob) {
          SyntheticSample s = synthesize(x, cfg.perlin, textures, rng.next_u64());
          images.push_back(std::move(s.image));
          masks.push_back(std::move(s.mask));
        } else {
          images.push_back(x);
          masks.emplace_back(x.height(), x.width());
        }
      }
      ObjectiveGrads<float> g;
      const LossBreakdown loss =
          compute_objective<float>(backbone, model.adapters.per_layer, head,
                                   images, masks, objective, &g);
      if (!std::isfinite(loss.total)) {
        throw DivergenceError("training diverged: non-finite loss", step);
      }
      opt.begin_step();
      for (auto& [layer, p] : model.adapters.per_layer) {
        const AdapterGrads<float>& ag = g.adapters.at(layer);
        opt.update(p.w1, ag.w1);
        opt.update(p.b1, ag.b1);
        opt.update(p.w2, ag.w2);
        opt.update(p.b2, ag.b2);
        opt.update(p.bn_gamma, ag.bn_gamma);
        opt.update(p.bn_beta, ag.bn_beta);
      }
      opt.update(head.w, g.head_w);
      opt.update(std::span<float>(&head.b, 1),
                 std::span<const float>(&g.head_b, 1));
      model.log.push_back({epoch, step, loss});
      ++step;
    }
  }
  model.prototype = compute_prototype(backbone, train);
  if (cfg.precision == Precision::kInt8) {
    model.adapters = quantize_adapter_set(model.adapters);
  }
  return model;
}

// --- Bundles -------------------------------------------------------------

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kSingle:
      return "single";
    case Scenario::kMulticlass:
      return "multiclass";
    case Scenario::kContinual:
      return "continual";
  }
  return "single";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "single") return Scenario::kSingle;
  if (s == "multiclass") return Scenario::kMulticlass;
  if (s == "continual") return Scenario::kContinual;
  throw ConfigError("unknown scenario '" + s +
                    "' (expected single, multiclass or continual)");
}

int ModelBundle::task_id(const std::string& name) const {
  const int id = store.find(name);
  if (id < 0) throw ConfigError("bundle has no task '" + name + "'");
  return id;
}

Backbone make_backbone(const BackboneRef& ref) {
  return make_toy_backbone(ref.seed, backbone_spec_by_name(ref.spec));
}

void save_bundle(const ModelBundle& bundle, const fs::path& dir) {
  if (static_cast<int>(bundle.adapters.size()) != bundle.num_tasks()) {
    throw ConfigError("bundle adapters and prototypes disagree in task count");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  json j;
  j["format"] = "adapts-bundle";
  j["version"] = 1;
  j["scenario"] = scenario_name(bundle.scenario);
  j["backbone"] = {{"spec", bundle.backbone.spec},
                   {"seed", bundle.backbone.seed}};
  j["tasks"] = bundle.store.names();
  j["config"] = to_json(bundle.config);
  write_text_file(dir / "config.json", j.dump(2) + "\n");
  for (int t = 0; t < bundle.num_tasks(); ++t) {
    save_adapter_set(bundle.adapters[t],
                     dir / "tasks" / bundle.store.names()[t]);
  }
  save_store(bundle.store, dir / "prototypes");
}

ModelBundle load_bundle(const fs::path& dir) {
  ModelBundle b;
  json j;
  try {
    j = json::parse(read_text_file(dir / "config.json"));
    if (j.at("format").get<std::string>() != "adapts-bundle") {
      throw LoadError("not a model bundle: " + dir.string());
    }
    b.scenario = parse_scenario(j.at("scenario").get<std::string>());
    b.backbone.spec = j.at("backbone").at("spec").get<std::string>();
    b.backbone.seed = j.at("backbone").at("seed").get<std::uint64_t>();
    b.config = train_config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw LoadError("malformed bundle config in " + dir.string() + ": " +
                    e.what());
  } catch (const ConfigError& e) {
    throw LoadError("invalid bundle config in " + dir.string() + ": " +
                    e.what());
  } catch (const IoError& e) {
    throw LoadError("not a model bundle: " + std::string(e.what()));
  }
  b.store = load_store(dir / "prototypes");
  const auto names = j.at("tasks").get<std::vector<std::string>>();
  if (names != b.store.names()) {
    throw LoadError("bundle task list does not match prototype store");
  }
  for (const auto& name : names) {
    b.adapters.push_back(load_adapter_set(dir / "tasks" / name));
  }
  return b;
}

ModelBundle quantize_bundle(const ModelBundle& bundle) {
  ModelBundle q = bundle;
  q.config.precision = Precision::kInt8;
  for (auto& set : q.adapters) set = quantize_adapter_set(set);
  return q;
}

MemoryReport memory_report(const ModelBundle& bundle) {
  std::uint64_t adapters = 0;
  for (const auto& set : bundle.adapters) adapters += adapter_memory_bytes(set);
  std::map<std::string, std::uint64_t> parts{{"adapters", adapters}};
  if (bundle.routed()) parts["prototypes"] = bundle.store.memory_bytes();
  return make_memory_report(
      backbone_memory_bytes(backbone_spec_by_name(bundle.backbone.spec)),
      std::move(parts));
}

// --- Inference and evaluation ---------------------------------------------

InferResult infer(const ModelBundle& bundle, const Backbone& backbone,
                  const Image& image, std::optional<int> task) {
  if (bundle.num_tasks() == 0) throw ConfigError("bundle has no tasks");
  InferResult r;
  if (task) {
    if (*task < 0 || *task >= bundle.num_tasks()) {
      throw ConfigError("task id out of range");
    }
    r.task = *task;
  } else {
    RouteResult route = identify_task(bundle.store, image, backbone);
    r.task = route.task;
    r.distances = std::move(route.distances);
  }
  const BackboneSpec& spec = backbone.spec();
  const std::set<int> taps(spec.tap_layers.begin(), spec.tap_layers.end());
  const StudentPath sp(backbone, bundle.adapters[r.task]);
  const FeaturePyramid<float> ft = backbone.forward_features(image, taps);
  const FeaturePyramid<float> fs = student_forward(sp, image, taps);
  r.map = anomaly_map(ft, fs, image.height(), image.width(),
                      bundle.config.combine, bundle.config.smooth_sigma);
  return r;
}

MetricRecord evaluate_category(const ModelBundle& bundle,
                               const Backbone& backbone,
                               const CategoryData& data) {
  const int own = bundle.task_id(data.name);
  std::vector<float> scores;
  std::vector<FloatField> maps;
  int correct = 0;
  for (const Image& img : data.test) {
    InferResult r = bundle.routed() ? infer(bundle, backbone, img)
                                    : infer(bundle, backbone, img, own);
    correct += r.task == own ? 1 : 0;
    scores.push_back(r.map.image_score);
    maps.push_back(std::move(r.map.map));
  }
  MetricRecord rec = evaluate_scores(data.name, scores, data.test_labels, maps,
                                     data.test_masks);
  if (bundle.routed()) {
    rec.routing_accuracy =
        data.test.empty() ? 0.0
                          : static_cast<double>(correct) / data.test.size();
  }
  return rec;
}

ScenarioReport evaluate_bundle(const ModelBundle& bundle,
                               const Backbone& backbone,
                               const std::vector<CategoryData>& data) {
  std::vector<MetricRecord> records;
  for (const auto& d : data) {
    records.push_back(evaluate_category(bundle, backbone, d));
  }
  return make_report(std::move(records));
}

// --- Scenarios -----------------------------------------------------------

std::vector<CategoryData> load_dataset(const DatasetLayout& layout,
                                       const BackboneSpec& spec) {
  std::vector<CategoryData> out;
  for (const auto& cat : layout.categories) {
    out.push_back(load_category(cat, spec.input_height, spec.input_width));
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// failure.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void check_unique_names(const std::vector<CategoryData>& data) {
  if (data.empty()) throw DatasetError("no categories to train on");
  std::set<std::string> seen;
  for (const auto& d : data) {
    if (!seen.insert(d.name).second) {
      throw DatasetError("duplicate category '" + d.name + "'");
    }
  }
}

ModelBundle empty_bundle(const TrainConfig& cfg, Scenario scenario) {
  ModelBundle b;
  b.config = cfg;
  b.scenario = scenario;
  b.backbone = {cfg.backbone, cfg.backbone_seed};
  b.store = PrototypeStore(backbone_spec_by_name(cfg.backbone).embed_dim);
  return b;
}

ScenarioResult run_joint(const std::vector<CategoryData>& data,
                         const TrainConfig& cfg, const RunOptions& opts,
                         Scenario scenario) {
  cfg.validate();
  check_unique_names(data);
  const Backbone backbone = make_backbone({cfg.backbone, cfg.backbone_seed});
  std::vector<TaskModel> models(data.size());
  parallel_for(data.size(), opts.workers, [&](std::size_t i) {
    models[i] = train_task(backbone, data[i].train, cfg,
                           task_seed(cfg, data[i].name), opts.textures);
  });
  ScenarioResult result;
  result.bundle = empty_bundle(cfg, scenario);
  for (std::size_t i = 0; i < data.size(); ++i) {
    result.bundle.store.add_task(models[i].prototype, data[i].name);
    result.bundle.adapters.push_back(std::move(models[i].adapters));
    result.logs.push_back(std::move(models[i].log));
  }
  result.report = evaluate_bundle(result.bundle, backbone, data);
  return result;
}

}  // namespace

ScenarioResult run_single(const std::vector<CategoryData>& data,
                          const TrainConfig& cfg, const RunOptions& opts) {
  return run_joint(data, cfg, opts, Scenario::kSingle);
}

ScenarioResult run_multiclass(const std::vector<CategoryData>& data,
                              const TrainConfig& cfg, const RunOptions& opts) {
  return run_joint(data, cfg, opts, Scenario::kMulticlass);
}

ScenarioResult run_continual(const std::vector<CategoryData>& data,
                             const TrainConfig& cfg,
                             const std::vector<std::string>& order,
                             const RunOptions& opts) {
  cfg.validate();
  check_unique_names(data);
  std::vector<std::string> sorted_order = order;
  std::vector<std::string> names;
  for (const auto& d : data) names.push_back(d.name);
  std::sort(sorted_order.begin(), sorted_order.end());
  std::sort(names.begin(), names.end());
  if (sorted_order != names) {
    throw ConfigError("continual order must be a permutation of the categories");
  }
  const Backbone backbone = make_backbone({cfg.backbone, cfg.backbone_seed});
  ScenarioResult result;
  result.bundle = empty_bundle(cfg, Scenario::kContinual);
  for (const std::string& name : order) {
    const auto it = std::find_if(data.begin(), data.end(),
                                 [&](const auto& d) { return d.name == name; });
    // Only the current task's data is touched while it trains.
    TaskModel m = train_task(backbone, it->train, cfg, task_seed(cfg, name),
                             opts.textures);
    result.bundle.store.add_task(m.prototype, name);
    result.bundle.adapters.push_back(std::move(m.adapters));
    result.logs.push_back(std::move(m.log));
    if (opts.on_task_done) opts.on_task_done(result.bundle);
  }
  result.report = evaluate_bundle(result.bundle, backbone, data);
  return result;
}

}  // namespace adapts
