// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "adapts/errors.hpp"

namespace adapts {

namespace {

void check_sizes(std::span<const float> scores,
                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw MetricError("scores and labels differ in length");
  }
}

// Indices sorted by descending score.
std::vector<std::size_t> order_desc(std::span<const float> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return idx;
}

// Calls fn(tp, fp) after each group of tied scores, highest first.
template <typename Fn>
void sweep_thresholds(std::span<const float> scores,
                      std::span<const std::uint8_t> labels, Fn fn) {
  const auto idx = order_desc(scores);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const float s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) {
      if (labels[idx[i]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    fn(tp, fp);
  }
}

std::uint64_t count_positives(std::span<const std::uint8_t> labels) {
  return static_cast<std::uint64_t>(
      std::count_if(labels.begin(), labels.end(), [](auto l) { return l; }));
}

}  // namespace

double auroc(std::span<const float> scores,
             std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const std::uint64_t n_pos = count_positives(labels);
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auroc undefined: labels contain a single class");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Sum of (1-based, mid-tied) ranks of positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      pos_in_group += labels[idx[j]] ? 1 : 0;
      ++j;
    }
    const double mid_rank = 0.5 * (static_cast<double>(i + 1) + j);
    rank_sum += mid_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double average_precision(std::span<const float> scores,
                         std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const std::uint64_t n_pos = count_positives(labels);
  if (n_pos == 0) throw MetricError("average precision undefined: no positives");
  double ap = 0.0;
  double prev_recall = 0.0;
  sweep_thresholds(scores, labels, [&](std::uint64_t tp, std::uint64_t fp) {
    const double recall = static_cast<double>(tp) / n_pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  });
  return ap;
}

double best_f1(std::span<const float> scores,
               std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const std::uint64_t n_pos = count_positives(labels);
  if (n_pos == 0) throw MetricError("best F1 undefined: no positives");
  double best = 0.0;
  sweep_thresholds(scores, labels, [&](std::uint64_t tp, std::uint64_t fp) {
    const double f1 = 2.0 * tp / static_cast<double>(tp + fp + n_pos);
    best = std::max(best, f1);
  });
  return best;
}

MetricRecord evaluate_scores(const std::string& category,
                             const std::vector<float>& image_scores,
                             const std::vector<std::uint8_t>& image_labels,
                             const std::vector<FloatField>& maps,
                             const std::vector<Mask>& masks) {
  if (maps.size() != masks.size() || maps.size() != image_scores.size()) {
    throw MetricError("evaluate: maps, masks and scores differ in count");
  }
  MetricRecord r;
  r.category = category;
  r.n_images = static_cast<int>(image_scores.size());
  r.i_roc = auroc(image_scores, image_labels);
  std::vector<float> pix;
  std::vector<std::uint8_t> gt;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].height() != masks[i].height() ||
        maps[i].width() != masks[i].width()) {
      throw MetricError("evaluate: map and mask sizes differ for image " +
                        std::to_string(i));
    }
    pix.insert(pix.end(), maps[i].values().begin(), maps[i].values().end());
    gt.insert(gt.end(), masks[i].values().begin(), masks[i].values().end());
  }
  r.p_roc = auroc(pix, gt);
  r.ap = average_precision(pix, gt);
  r.p_f1 = best_f1(pix, gt);
  return r;
}

MetricRecord aggregate_scenario(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw MetricError("aggregate: no records");
  MetricRecord m;
  m.category = "mean";
  double routing = 0.0;
  bool has_routing = true;
  for (const auto& r : records) {
    m.n_images += r.n_images;
    m.i_roc += r.i_roc;
    m.p_roc += r.p_roc;
    m.p_f1 += r.p_f1;
    m.ap += r.ap;
    if (r.routing_accuracy) {
      routing += *r.routing_accuracy;
    } else {
      has_routing = false;
    }
  }
  const double n = static_cast<double>(records.size());
  m.i_roc /= n;
  m.p_roc /= n;
  m.p_f1 /= n;
  m.ap /= n;
  if (has_routing) m.routing_accuracy = routing / n;
  return m;
}

MemoryReport make_memory_report(
    std::uint64_t backbone_bytes,
    std::map<std::string, std::uint64_t> breakdown) {
  MemoryReport r;
  r.backbone_bytes = backbone_bytes;
  for (const auto& [name, bytes] : breakdown) r.additional_bytes += bytes;
  r.total_bytes = backbone_bytes + r.additional_bytes;
  r.breakdown = std::move(breakdown);
  return r;
}

std::uint64_t backbone_memory_bytes(const BackboneSpec& spec) {
  std::uint64_t params = 0;
  int in = 3;
  for (const auto& st : spec.stages) {
    params += 9ull * in * st.channels + st.channels;          // down
    params += 9ull * st.channels * st.channels + st.channels;  // refine
    in = st.channels;
  }
  return params * 4;
}

MemoryReport plan_memory_report(const BackboneSpec& spec,
                                const AdapterKind& kind,
                                const std::set<int>& layers,
                                Precision precision, int num_tasks,
                                bool with_router) {
  if (num_tasks < 1) throw ConfigError("memory plan needs at least one task");
  std::vector<int> channels;
  for (int layer : layers) {
    if (layer < 1 || layer > spec.num_stages()) {
      throw ConfigError("adapter layer " + std::to_string(layer) +
                        " outside backbone stages");
    }
    channels.push_back(spec.channels(layer));
  }
  std::map<std::string, std::uint64_t> parts;
  parts["adapters"] = static_cast<std::uint64_t>(num_tasks) *
                      adapter_memory_bytes(kind, channels, precision);
  if (with_router) {
    parts["prototypes"] =
        static_cast<std::uint64_t>(num_tasks) * spec.embed_dim * 4;
  }
  return make_memory_report(backbone_memory_bytes(spec), std::move(parts));
}

std::string memory_report_text(const MemoryReport& report) {
  std::string out;
  out += "Backbone: " + format_mib(report.backbone_bytes) + " MB\n";
  for (const auto& [name, bytes] : report.breakdown) {
    out += "  " + name + ": " + format_mib(bytes) + " MB (" +
           std::to_string(bytes) + " bytes)\n";
  }
  out += "Additional = " + format_mib(report.additional_bytes) + " MB (" +
         std::to_string(report.additional_bytes) + " bytes)\n";
  out += "Total = " + format_mib(report.total_bytes) + " MB\n";
  return out;
}

nlohmann::json memory_report_json(const MemoryReport& report) {
  nlohmann::json j;
  j["backbone_bytes"] = report.backbone_bytes;
  j["additional_bytes"] = report.additional_bytes;
  j["total_bytes"] = report.total_bytes;
  j["additional_mb"] = format_mib(report.additional_bytes);
  j["total_mb"] = format_mib(report.total_bytes);
  j["breakdown"] = report.breakdown;
  return j;
}

ScenarioReport make_report(std::vector<MetricRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const MetricRecord& a, const MetricRecord& b) {
              return a.category < b.category;
            });
  ScenarioReport r;
  r.aggregate = aggregate_scenario(records);
  r.records = std::move(records);
  return r;
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_row(const MetricRecord& r) {
  return r.category + "," + std::to_string(r.n_images) + "," + fmt6(r.i_roc) +
         "," + fmt6(r.p_roc) + "," + fmt6(r.p_f1) + "," + fmt6(r.ap) + "," +
         (r.routing_accuracy ? fmt6(*r.routing_accuracy) : std::string()) +
         "\n";
}

nlohmann::json record_json(const MetricRecord& r) {
  nlohmann::json j;
  j["category"] = r.category;
  j["n_images"] = r.n_images;
  j["i_roc"] = r.i_roc;
  j["p_roc"] = r.p_roc;
  j["p_f1"] = r.p_f1;
  j["ap"] = r.ap;
  j["routing_accuracy"] = r.routing_accuracy
                              ? nlohmann::json(*r.routing_accuracy)
                              : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::string report_csv(const ScenarioReport& report) {
  std::string out = "category,n_images,i_roc,p_roc,p_f1,ap,routing_acc\n";
  for (const auto& r : report.records) out += csv_row(r);
  out += csv_row(report.aggregate);
  return out;
}

nlohmann::json report_json(const ScenarioReport& report) {
  nlohmann::json j;
  j["categories"] = nlohmann::json::array();
  for (const auto& r : report.records) j["categories"].push_back(record_json(r));
  j["aggregate"] = record_json(report.aggregate);
  return j;
}

}  // namespace adapts
