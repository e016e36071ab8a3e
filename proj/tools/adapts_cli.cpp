// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// adapts: train, evaluate and inspect adapter-based student-teacher anomaly
// detectors.
//
// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adapts/container.hpp"
#include "adapts/dataset.hpp"
#include "adapts/errors.hpp"
#include "adapts/image_io.hpp"
#include "adapts/ops.hpp"
#include "adapts/pipeline.hpp"

namespace fs = std::filesystem;
using namespace adapts;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_reports(const ScenarioReport& report, const fs::path& csv_path) {
  write_text_file(csv_path, report_csv(report));
  fs::path json_path = csv_path;
  json_path.replace_extension(".json");
  write_text_file(json_path, report_json(report).dump(2) + "\n");
}

struct TrainArgs {
  std::string scenario = "single";
  std::string data;
  std::string config;
  std::string out;
  std::string order;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(a.config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot parse config '" + a.config + "': " + e.what());
    }
    cfg = train_config_from_json(j);
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const Scenario scenario = parse_scenario(a.scenario);
  const DatasetLayout layout = scan_dataset(a.data);
  const auto data = load_dataset(layout, backbone_spec_by_name(cfg.backbone));

  RunOptions opts;
  opts.workers = a.workers;
  if (!cfg.texture_dir.empty()) {
    opts.textures.use_bank = true;
    for (const auto& e : fs::directory_iterator(cfg.texture_dir)) {
      if (e.path().extension() == ".png") {
        opts.textures.bank.push_back(read_png(e.path()));
      }
    }
  }

  ScenarioResult result;
  switch (scenario) {
    case Scenario::kSingle:
      result = run_single(data, cfg, opts);
      break;
    case Scenario::kMulticlass:
      result = run_multiclass(data, cfg, opts);
      break;
    case Scenario::kContinual: {
      std::vector<std::string> order = split_csv(a.order);
      if (order.empty()) {
        for (const auto& c : layout.categories) order.push_back(c.name);
      }
      result = run_continual(data, cfg, order, opts);
      break;
    }
  }
  const fs::path out(a.out);
  save_bundle(result.bundle, out);
  for (int t = 0; t < result.bundle.num_tasks(); ++t) {
    write_text_file(out / "logs" / (result.bundle.store.names()[t] + ".csv"),
                    train_log_csv(result.logs[t]));
  }
  write_reports(result.report, out / "report.csv");
  std::cout << report_csv(result.report);
  return 0;
}

int cmd_eval(const std::string& bundle_dir, const std::string& data_dir,
             const std::string& report_path) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  const Backbone backbone = make_backbone(bundle.backbone);
  const DatasetLayout layout = scan_dataset(data_dir);
  std::vector<CategoryData> data;
  for (const auto& cat : layout.categories) {
    if (bundle.store.find(cat.name) < 0) {
      throw DatasetError("bundle has no task for category '" + cat.name + "'");
    }
    data.push_back(load_category(cat, backbone.spec().input_height,
                                 backbone.spec().input_width));
  }
  const ScenarioReport report = evaluate_bundle(bundle, backbone, data);
  if (!report_path.empty()) write_reports(report, report_path);
  std::cout << report_csv(report);
  return 0;
}

int cmd_infer(const std::string& bundle_dir, const std::string& image_path,
              const std::string& heatmap_out, const std::string& task_name) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  const Backbone backbone = make_backbone(bundle.backbone);
  const Image raw = read_png(image_path);
  const Image x = preprocess(raw, backbone.spec().input_height,
                             backbone.spec().input_width);
  std::optional<int> task;
  if (!task_name.empty()) task = bundle.task_id(task_name);
  const InferResult r = infer(bundle, backbone, x, task);
  std::printf("task=%s score=%.6f\n", bundle.store.names()[r.task].c_str(),
              r.map.image_score);
  if (!heatmap_out.empty()) {
    const FloatField full =
        resize_bilinear(r.map.map, raw.height(), raw.width());
    write_heatmap_png(heatmap_out, full, r.map.image_score);
  }
  return 0;
}

int cmd_identify(const std::string& bundle_dir, const std::string& image_path) {
  const ModelBundle bundle = load_bundle(bundle_dir);
  const Backbone backbone = make_backbone(bundle.backbone);
  const Image x = preprocess(read_png(image_path), backbone.spec().input_height,
                             backbone.spec().input_width);
  const RouteResult r = identify_task(bundle.store, x, backbone);
  std::printf("task=%s id=%d\n", bundle.store.names()[r.task].c_str(), r.task);
  for (int t = 0; t < bundle.num_tasks(); ++t) {
    std::printf("  %s %.6f\n", bundle.store.names()[t].c_str(), r.distances[t]);
  }
  return 0;
}

int cmd_quantize(const std::string& bundle_dir, const std::string& out) {
  const ModelBundle q = quantize_bundle(load_bundle(bundle_dir));
  save_bundle(q, out);
  std::cout << memory_report_text(memory_report(q));
  return 0;
}

struct MemArgs {
  std::string bundle;
  std::string backbone = "wide_resnet50_2";
  std::string adapter = "linear";
  std::string layers = "2,3";
  std::string precision = "f32";
  int tasks = 1;
  bool router = false;
  bool json = false;
};

int cmd_mem_report(const MemArgs& a) {
  MemoryReport report;
  if (!a.bundle.empty()) {
    report = memory_report(load_bundle(a.bundle));
  } else {
    std::set<int> layers;
    for (const auto& s : split_csv(a.layers)) {
      try {
        layers.insert(std::stoi(s));
      } catch (const std::exception&) {
        throw ConfigError("bad layer '" + s + "'");
      }
    }
    report = plan_memory_report(backbone_spec_by_name(a.backbone),
                                AdapterKind::parse(a.adapter), layers,
                                parse_precision(a.precision), a.tasks, a.router);
  }
  if (a.json) {
    std::cout << memory_report_json(report).dump(2) << "\n";
  } else {
    std::cout << memory_report_text(report);
  }
  return 0;
}

int cmd_make_toy_data(const std::string& out, const ToyDatasetOptions& o) {
  const DatasetLayout layout = make_toy_dataset(out, o);
  for (const auto& c : layout.categories) {
    std::printf("%s: %zu train, %zu test\n", c.name.c_str(), c.train.size(),
                c.test.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adapts: adapter-based student-teacher anomaly detection"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a bundle on a dataset");
  train_cmd->add_option("--scenario", train.scenario,
                        "single, multiclass or continual")
      ->check(CLI::IsMember({"single", "multiclass", "continual"}));
  train_cmd->add_option("--data", train.data, "Dataset root")->required();
  train_cmd->add_option("--config", train.config, "JSON training config");
  train_cmd->add_option("--out", train.out, "Output bundle directory")
      ->required();
  train_cmd->add_option("--order", train.order,
                        "Comma-separated category order (continual)");
  train_cmd->add_option("--seed", train.seed, "Overrides the config seed");
  train_cmd->add_option("--workers", train.workers, "Parallel task workers")
      ->check(CLI::PositiveNumber);

  std::string bundle, data, report, image, heatmap, task, out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a bundle");
  eval_cmd->add_option("--bundle", bundle)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--report", report, "CSV path (JSON written alongside)");

  auto* infer_cmd = app.add_subcommand("infer", "Score one image");
  infer_cmd->add_option("--bundle", bundle)->required();
  infer_cmd->add_option("--image", image)->required();
  infer_cmd->add_option("--heatmap-out", heatmap, "PNG heatmap path");
  infer_cmd->add_option("--task", task, "Skip routing and use this task");

  auto* identify_cmd = app.add_subcommand("identify", "Route one image");
  identify_cmd->add_option("--bundle", bundle)->required();
  identify_cmd->add_option("--image", image)->required();

  auto* quantize_cmd =
      app.add_subcommand("quantize", "Int8-quantize every adapter set");
  quantize_cmd->add_option("--bundle", bundle)->required();
  quantize_cmd->add_option("--out", out)->required();

  MemArgs mem;
  auto* mem_cmd = app.add_subcommand(
      "mem-report", "Memory of a bundle, or of a planned deployment");
  mem_cmd->add_option("--bundle", mem.bundle);
  mem_cmd->add_option("--backbone", mem.backbone);
  mem_cmd->add_option("--adapter", mem.adapter);
  mem_cmd->add_option("--layers", mem.layers, "Comma-separated stages");
  mem_cmd->add_option("--precision", mem.precision)
      ->check(CLI::IsMember({"f32", "int8"}));
  mem_cmd->add_option("--tasks", mem.tasks)->check(CLI::PositiveNumber);
  mem_cmd->add_flag("--router", mem.router, "Count prototypes");
  mem_cmd->add_flag("--json", mem.json);

  ToyDatasetOptions toy;
  std::string toy_out;
  auto* toy_cmd =
      app.add_subcommand("make-toy-data", "Write a synthetic MVTec-style set");
  toy_cmd->add_option("--out", toy_out)->required();
  toy_cmd->add_option("--categories", toy.categories)
      ->check(CLI::PositiveNumber);
  toy_cmd->add_option("--train", toy.train_per_category)
      ->check(CLI::PositiveNumber);
  toy_cmd->add_option("--test", toy.test_per_class, "Per class")
      ->check(CLI::PositiveNumber);
  toy_cmd->add_option("--size", toy.image_size);
  toy_cmd->add_option("--seed", toy.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(bundle, data, report);
    if (*infer_cmd) return cmd_infer(bundle, image, heatmap, task);
    if (*identify_cmd) return cmd_identify(bundle, image);
    if (*quantize_cmd) return cmd_quantize(bundle, out);
    if (*mem_cmd) return cmd_mem_report(mem);
    if (*toy_cmd) return cmd_make_toy_data(toy_out, toy);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
