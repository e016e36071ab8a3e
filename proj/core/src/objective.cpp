// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/objective.hpp"

#include <algorithm>
#include <cmath>

#include "adapts/errors.hpp"
#include "adapts/matching.hpp"
#include "adapts/ops.hpp"

namespace adapts {

namespace {

// Backpropagates dL/d(phi(s)) to dL/ds for one feature map, accumulating.
template <typename T>
void normalize_backward(const Tensor<T>& s, const Tensor<T>& grad_phi,
                        Tensor<T>& grad_s) {
  const std::size_t hw = static_cast<std::size_t>(s.height()) * s.width();
  const int C = s.channels();
  std::vector<T> norm(hw, T(0)), dot(hw, T(0));
  for (int c = 0; c < C; ++c) {
    const T* p = s.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) norm[k] += p[k] * p[k];
  }
  std::vector<bool> guarded(hw);
  for (std::size_t k = 0; k < hw; ++k) {
    norm[k] = std::sqrt(norm[k]);
    guarded[k] = norm[k] < static_cast<T>(kNormEps);
    if (guarded[k]) norm[k] = static_cast<T>(kNormEps);
  }
  for (int c = 0; c < C; ++c) {
    const T* p = s.plane(c).data();
    const T* g = grad_phi.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) dot[k] += g[k] * (p[k] / norm[k]);
  }
  for (int c = 0; c < C; ++c) {
    const T* p = s.plane(c).data();
    const T* g = grad_phi.plane(c).data();
    T* o = grad_s.plane(c).data();
    for (std::size_t k = 0; k < hw; ++k) {
      if (guarded[k]) {
        o[k] += g[k] / norm[k];
      } else {
        o[k] += (g[k] - (p[k] / norm[k]) * dot[k]) / norm[k];
      }
    }
  }
}

}  // namespace

template <typename T>
LossBreakdown compute_objective(const Backbone& backbone,
                                std::map<int, AdapterParamsT<T>>& adapters,
                                const SegHeadT<T>& head,
                                const std::vector<Image>& images,
                                const std::vector<Mask>& masks,
                                const ObjectiveOptions& options,
                                ObjectiveGrads<T>* grads) {
  const BackboneSpec& spec = backbone.spec();
  const std::size_t n = images.size();
  if (n == 0 || masks.size() != n) {
    throw ConfigError("objective: images and masks must be non-empty and "
                      "of equal count");
  }
  if (adapters.empty()) throw ConfigError("objective: no adapters");
  for (const auto& [l, p] : adapters) {
    if (!spec.is_tap(l) || p.channels != spec.channels(l)) {
      throw ShapeError("objective: adapter at stage " + std::to_string(l) +
                       " does not match the backbone");
    }
  }
  const std::vector<int>& taps = spec.tap_layers;
  const int last = taps.back();
  const int first_adapter = adapters.begin()->first;
  const T inv_n = T(1) / static_cast<T>(n);

  // Teacher pass.
  std::vector<std::map<int, Tensor<T>>> teacher(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T> h = backbone.standardize<T>(images[i]);
    for (int s = 1; s <= last; ++s) {
      h = backbone.stage_forward(s, h);
      if (s >= first_adapter || spec.is_tap(s)) teacher[i][s] = h;
    }
  }

  // Student pass with traces, starting at the first adapter.
  std::map<int, std::vector<StageTrace<T>>> stage_traces;
  std::map<int, AdapterTrace<T>> adapter_traces;
  std::vector<std::map<int, Tensor<T>>> student(n);
  std::vector<Tensor<T>> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = teacher[i].at(first_adapter);
  for (int s = first_adapter; s <= last; ++s) {
    if (s > first_adapter) {
      auto& tr = stage_traces[s];
      tr.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = backbone.stage_forward(s, h[i], &tr[i]);
      }
    }
    if (auto it = adapters.find(s); it != adapters.end()) {
      h = adapter_forward_batch(it->second, h, options.bn_mode,
                                grads ? &adapter_traces[s] : nullptr);
    }
    if (spec.is_tap(s)) {
      for (std::size_t i = 0; i < n; ++i) student[i][s] = h[i];
    }
  }

  LossBreakdown total;
  // dL/d(student tap feature), per item.
  std::vector<std::map<int, Tensor<T>>> grad_taps(n);
  if (grads) {
    grads->adapters.clear();
    for (const auto& [l, p] : adapters) {
      grads->adapters.emplace(l, AdapterGrads<T>(p));
    }
    grads->head_w.assign(head.w.size(), T(0));
    grads->head_b = T(0);
  }

  for (std::size_t i = 0; i < n; ++i) {
    FeaturePyramid<T> ft, fs;
    for (int l : taps) {
      ft[l] = teacher[i].at(l);
      fs[l] = (l < first_adapter) ? teacher[i].at(l) : student[i].at(l);
    }
    const Tensor<T> d = diff_tensor(ft, fs);
    const Field<T> pred = seg_forward(head, d);
    const Mask m = downsample_mask(masks[i], d.height(), d.width());
    const double stfpm = stfpm_loss(ft, fs);
    const double focal = focal_loss(pred, m, options.gamma);
    const double l1 = l1_loss(pred, m);
    total.stfpm += stfpm / n;
    total.focal += focal / n;
    total.l1 += l1 / n;
    if (!grads) continue;

    // Gradient w.r.t. the head logits.
    Field<T> g_pred = focal_loss_grad(pred, m, options.gamma);
    const Field<T> g_l1 = l1_loss_grad(pred, m);
    Field<T> g_logit(pred.height(), pred.width());
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const T y = pred.values()[k];
      g_logit.values()[k] =
          (g_pred.values()[k] + g_l1.values()[k]) * y * (T(1) - y) * inv_n;
    }
    for (int c = 0; c < d.channels(); ++c) {
      const T* dp = d.plane(c).data();
      T acc = 0;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        acc += dp[k] * g_logit.values()[k];
      }
      grads->head_w[c] += acc;
    }
    for (T v : g_logit.values()) grads->head_b += v;

    // Gradient w.r.t. phi(student) per tap: matching term plus the
    // (adjoint-upsampled) head term. The diff is phi(t) - phi(s).
    int offset = 0;
    for (int l : taps) {
      const Tensor<T>& t = ft.at(l);
      const int C = t.channels();
      if (l < first_adapter) {
        offset += C;
        continue;
      }
      const Tensor<T>& s = fs.at(l);
      const Tensor<T> a = channel_normalize(t);
      const Tensor<T> b = channel_normalize(s);
      const std::size_t hw = static_cast<std::size_t>(t.height()) * t.width();
      Tensor<T> grad_phi(t.shape());
      const T coef = T(2) / static_cast<T>(hw) * inv_n;
      std::vector<T> scratch(static_cast<std::size_t>(d.height()) * d.width());
      for (int c = 0; c < C; ++c) {
        T* gp = grad_phi.plane(c).data();
        const T* pa = a.plane(c).data();
        const T* pb = b.plane(c).data();
        for (std::size_t k = 0; k < hw; ++k) gp[k] = -coef * (pa[k] - pb[k]);
        // d(logit)/d(diff) = w_c, adjoint of the upsampling, sign flip for s.
        const T wc = head.w[offset + c];
        for (std::size_t k = 0; k < scratch.size(); ++k) {
          scratch[k] = -wc * g_logit.values()[k];
        }
        resize_bilinear_plane_adjoint(scratch.data(), d.height(), d.width(), gp,
                                      t.height(), t.width());
      }
      Tensor<T> grad_s(s.shape());
      normalize_backward(s, grad_phi, grad_s);
      grad_taps[i][l] = std::move(grad_s);
      offset += C;
    }
  }
  total.total = total.stfpm + total.focal + total.l1;
  if (!std::isfinite(total.total)) return total;
  if (!grads) return total;

  // Backward through the student trunk, last stage to first adapter.
  std::vector<Tensor<T>> g(n);
  for (int s = last; s >= first_adapter; --s) {
    for (std::size_t i = 0; i < n; ++i) {
      auto it = grad_taps[i].find(s);
      if (it == grad_taps[i].end()) {
        if (g[i].empty()) g[i] = Tensor<T>(student[i].count(s)
                                               ? student[i].at(s).shape()
                                               : teacher[i].at(s).shape());
        continue;
      }
      if (g[i].empty()) {
        g[i] = it->second;
      } else {
        auto dst = g[i].values();
        auto src = it->second.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
    if (auto it = adapters.find(s); it != adapters.end()) {
      g = adapter_backward_batch(it->second, adapter_traces.at(s), g,
                                 grads->adapters.at(s));
    }
    if (s > first_adapter) {
      const auto& tr = stage_traces.at(s);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = backbone.stage_backward(s, tr[i], g[i]);
      }
    }
  }
  return total;
}

template LossBreakdown compute_objective<float>(
    const Backbone&, std::map<int, AdapterParamsT<float>>&,
    const SegHeadT<float>&, const std::vector<Image>&, const std::vector<Mask>&,
    const ObjectiveOptions&, ObjectiveGrads<float>*);
template LossBreakdown compute_objective<double>(
    const Backbone&, std::map<int, AdapterParamsT<double>>&,
    const SegHeadT<double>&, const std::vector<Image>&,
    const std::vector<Mask>&, const ObjectiveOptions&,
    ObjectiveGrads<double>*);

}  // namespace adapts
