// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/matching.hpp"

#include <algorithm>
#include <cmath>

#include "adapts/errors.hpp"
#include "adapts/ops.hpp"

namespace adapts {

void validate_adapters(const BackboneSpec& spec, const AdapterSet& adapters) {
  for (const auto& [layer, p] : adapters.per_layer) {
    if (!spec.is_tap(layer)) {
      throw ConfigError("adapter at stage " + std::to_string(layer) +
                        " is not on a tap layer");
    }
    if (p.channels != spec.channels(layer)) {
      throw ShapeError("adapter at stage " + std::to_string(layer) + " has " +
                       std::to_string(p.channels) + " channels, stage has " +
                       std::to_string(spec.channels(layer)));
    }
  }
}

StudentPath::StudentPath(const Backbone& backbone, const AdapterSet& adapters)
    : backbone_(&backbone), adapters_(&adapters) {
  validate_adapters(backbone.spec(), adapters);
}

FeaturePyramid<float> student_forward(const StudentPath& sp, const Image& x,
                                      const std::set<int>& taps) {
  FeaturePyramid<float> out;
  if (taps.empty()) return out;
  const Backbone& b = sp.backbone();
  for (int t : taps) {
    if (!b.spec().is_tap(t)) {
      throw ConfigError("stage " + std::to_string(t) + " is not a tap layer");
    }
  }
  const auto& per_layer = sp.adapters().per_layer;
  Tensor<float> h = b.standardize<float>(x);
  for (int s = 1; s <= *taps.rbegin(); ++s) {
    h = b.stage_forward(s, h);
    if (auto it = per_layer.find(s); it != per_layer.end()) {
      h = adapter_forward(it->second, h);
    }
    if (taps.count(s)) out[s] = h;
  }
  return out;
}

std::vector<FeaturePyramid<float>> student_forward(
    const Backbone& backbone, AdapterSet& adapters,
    const std::vector<Image>& batch, const std::set<int>& taps, BnMode mode) {
  validate_adapters(backbone.spec(), adapters);
  std::vector<FeaturePyramid<float>> out(batch.size());
  if (taps.empty() || batch.empty()) return out;
  std::vector<Tensor<float>> h;
  h.reserve(batch.size());
  for (const Image& img : batch) h.push_back(backbone.standardize<float>(img));
  for (int s = 1; s <= *taps.rbegin(); ++s) {
    for (auto& t : h) t = backbone.stage_forward(s, t);
    if (auto it = adapters.per_layer.find(s); it != adapters.per_layer.end()) {
      h = adapter_forward_batch(it->second, h, mode);
    }
    if (taps.count(s)) {
      for (std::size_t i = 0; i < h.size(); ++i) out[i][s] = h[i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> channel_normalize(const Tensor<T>& f) {
  Tensor<T> out(f.shape());
  const std::size_t hw = static_cast<std::size_t>(f.height()) * f.width();
  std::vector<T> norm(hw, T(0));
  for (int c = 0; c < f.channels(); ++c) {
    const T* p = f.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) norm[k] += p[k] * p[k];
  }
  for (T& n : norm) n = std::max(std::sqrt(n), static_cast<T>(kNormEps));
  for (int c = 0; c < f.channels(); ++c) {
    const T* p = f.plane(c).data();
    T* o = out.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) o[k] = p[k] / norm[k];
  }
  return out;
}

namespace {

template <typename T>
void check_pyramids(const FeaturePyramid<T>& ft, const FeaturePyramid<T>& fs) {
  if (ft.size() != fs.size()) {
    throw ShapeError("feature pyramids have different tap sets");
  }
  for (const auto& [l, t] : ft) {
    auto it = fs.find(l);
    if (it == fs.end()) {
      throw ShapeError("feature pyramids have different tap sets");
    }
    if (it->second.shape() != t.shape()) {
      throw ShapeError("feature shape mismatch at stage " + std::to_string(l));
    }
  }
}

}  // namespace

template <typename T>
Field<T> layer_diff_map(const Tensor<T>& ft, const Tensor<T>& fs) {
  if (ft.shape() != fs.shape()) {
    throw ShapeError("layer_diff_map: shape mismatch " + to_string(ft.shape()) +
                     " vs " + to_string(fs.shape()));
  }
  const Tensor<T> a = channel_normalize(ft);
  const Tensor<T> b = channel_normalize(fs);
  Field<T> out(ft.height(), ft.width());
  const std::size_t hw = out.size();
  T* o = out.data();
  for (int c = 0; c < ft.channels(); ++c) {
    const T* pa = a.plane(c).data();
    const T* pb = b.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) {
      const T d = pa[k] - pb[k];
      o[k] += d * d;
    }
  }
  return out;
}

template <typename T>
double stfpm_loss(const FeaturePyramid<T>& ft, const FeaturePyramid<T>& fs) {
  check_pyramids(ft, fs);
  double loss = 0;
  for (const auto& [l, t] : ft) {
    const Field<T> d = layer_diff_map(t, fs.at(l));
    double s = 0;
    for (T v : d.values()) s += v;
    loss += s / static_cast<double>(d.size());
  }
  return loss;
}

template <typename T>
double stfpm_loss(const std::vector<FeaturePyramid<T>>& ft,
                  const std::vector<FeaturePyramid<T>>& fs) {
  if (ft.size() != fs.size() || ft.empty()) {
    throw ShapeError("stfpm_loss: batch size mismatch");
  }
  double total = 0;
  for (std::size_t i = 0; i < ft.size(); ++i) total += stfpm_loss(ft[i], fs[i]);
  return total / static_cast<double>(ft.size());
}

std::string combine_name(Combine c) {
  return c == Combine::kSum ? "sum" : "product";
}

Combine parse_combine(const std::string& s) {
  if (s == "sum") return Combine::kSum;
  if (s == "product") return Combine::kProduct;
  throw ConfigError("unknown combine mode '" + s + "'");
}

AnomalyMap anomaly_map(const FeaturePyramid<float>& ft,
                       const FeaturePyramid<float>& fs, int out_h, int out_w,
                       Combine combine, double smooth_sigma) {
  if (ft.empty()) throw ConfigError("anomaly_map: empty tap set");
  check_pyramids(ft, fs);
  FloatField acc(out_h, out_w, combine == Combine::kSum ? 0.0f : 1.0f);
  for (const auto& [l, t] : ft) {
    const FloatField d = layer_diff_map(t, fs.at(l));
    const FloatField up = resize_bilinear(d, out_h, out_w);
    auto a = acc.values();
    auto u = up.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = combine == Combine::kSum ? a[k] + u[k] : a[k] * u[k];
    }
  }
  AnomalyMap out;
  out.map = gaussian_smooth(acc, smooth_sigma);
  for (float& v : out.map.values()) v = std::max(v, 0.0f);
  out.image_score = *std::max_element(out.map.values().begin(),
                                      out.map.values().end());
  return out;
}

template <typename T>
Tensor<T> diff_tensor(const FeaturePyramid<T>& ft,
                      const FeaturePyramid<T>& fs) {
  check_pyramids(ft, fs);
  if (ft.empty()) throw ConfigError("diff_tensor: empty tap set");
  int total_c = 0, hs = 0, ws = 0;
  for (const auto& [l, t] : ft) {
    total_c += t.channels();
    hs = std::max(hs, t.height());
    ws = std::max(ws, t.width());
  }
  Tensor<T> out(total_c, hs, ws);
  int offset = 0;
  for (const auto& [l, t] : ft) {
    const Tensor<T> a = channel_normalize(t);
    const Tensor<T> b = channel_normalize(fs.at(l));
    std::vector<T> d(static_cast<std::size_t>(t.height()) * t.width());
    for (int c = 0; c < t.channels(); ++c) {
      auto pa = a.plane(c);
      auto pb = b.plane(c);
      for (std::size_t k = 0; k < d.size(); ++k) d[k] = pa[k] - pb[k];
      resize_bilinear_plane(d.data(), t.height(), t.width(),
                            out.plane(offset + c).data(), hs, ws);
    }
    offset += t.channels();
  }
  return out;
}

#define ADAPTS_INSTANTIATE_MATCHING(T)                                       \
  template Tensor<T> channel_normalize<T>(const Tensor<T>&);                 \
  template double stfpm_loss<T>(const FeaturePyramid<T>&,                    \
                                const FeaturePyramid<T>&);                   \
  template double stfpm_loss<T>(const std::vector<FeaturePyramid<T>>&,       \
                                const std::vector<FeaturePyramid<T>>&);      \
  template Field<T> layer_diff_map<T>(const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> diff_tensor<T>(const FeaturePyramid<T>&,                \
                                    const FeaturePyramid<T>&);

ADAPTS_INSTANTIATE_MATCHING(float)
ADAPTS_INSTANTIATE_MATCHING(double)

#undef ADAPTS_INSTANTIATE_MATCHING

}  // namespace adapts
