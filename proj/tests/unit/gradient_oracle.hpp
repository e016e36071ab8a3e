// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Central finite differences against the analytic gradient of the full
// training objective, in double precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adapts/objective.hpp"
#include "test_support.hpp"

namespace adapts::testing {

inline constexpr double kFdStep = 1e-5;

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// 16x16 toy backbone, perturbed adapters at `layers`, seg head, and a batch
// of one clean and one masked image.
struct GradientProblem {
  Backbone backbone = make_toy_backbone(7, small_toy_spec(16));
  std::map<int, AdapterParamsT<double>> adapters;
  SegHeadT<double> head;
  std::vector<Image> images;
  std::vector<Mask> masks;
  ObjectiveOptions options;

  explicit GradientProblem(const std::set<int>& layers) {
    for (int layer : layers) {
      AdapterParams p = init_adapter(AdapterKind::linear(),
                                     backbone.spec().channels(layer), 11 + layer);
      perturb(p, 100 + layer);
      adapters[layer] = p.cast<double>();
    }
    SegHead h = init_seg_head(16 + 32 + 64, 5);
    h.b = 0.1f;
    head = h.cast<double>();
    images = {random_image(16, 16, 1), random_image(16, 16, 2)};
    Mask clean(16, 16);
    Mask defect(16, 16);
    for (int y = 4; y < 12; ++y) {
      for (int x = 2; x < 9; ++x) defect.at(y, x) = 1;
    }
    masks = {clean, defect};
  }

  // Fresh copy per call: train mode mutates running statistics.
  double loss(const std::map<int, AdapterParamsT<double>>& a,
              const SegHeadT<double>& h) const {
    auto copy = a;
    return compute_objective<double>(backbone, copy, h, images, masks, options,
                                     nullptr)
        .total;
  }

  ObjectiveGrads<double> analytic() const {
    auto copy = adapters;
    ObjectiveGrads<double> g;
    compute_objective<double>(backbone, copy, head, images, masks, options, &g);
    return g;
  }
};

// Worst relative error over every `stride`-th entry of `param`.
inline double check_vector(std::vector<double>& param,
                           const std::vector<double>& grad,
                           const std::function<double()>& eval,
                           std::size_t stride = 1) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); i += stride) {
    const double saved = param[i];
    param[i] = saved + kFdStep;
    const double up = eval();
    param[i] = saved - kFdStep;
    const double down = eval();
    param[i] = saved;
    worst = std::max(worst, rel_error(grad[i], (up - down) / (2 * kFdStep)));
  }
  return worst;
}

// Worst relative error per trainable tensor, keyed "layerN.name" or
// "head.w" / "head.b".
inline std::map<std::string, double> gradient_errors(GradientProblem& pb,
                                                     std::size_t stride = 1) {
  const ObjectiveGrads<double> g = pb.analytic();
  std::map<std::string, double> out;
  auto eval = [&] { return pb.loss(pb.adapters, pb.head); };
  for (auto& [layer, p] : pb.adapters) {
    const AdapterGrads<double>& ag = g.adapters.at(layer);
    const std::string prefix = "layer" + std::to_string(layer) + ".";
    out[prefix + "w1"] = check_vector(p.w1, ag.w1, eval, stride);
    out[prefix + "b1"] = check_vector(p.b1, ag.b1, eval, stride);
    out[prefix + "w2"] = check_vector(p.w2, ag.w2, eval, stride);
    out[prefix + "b2"] = check_vector(p.b2, ag.b2, eval, stride);
    out[prefix + "bn_gamma"] = check_vector(p.bn_gamma, ag.bn_gamma, eval, stride);
    out[prefix + "bn_beta"] = check_vector(p.bn_beta, ag.bn_beta, eval, stride);
  }
  out["head.w"] = check_vector(pb.head.w, g.head_w, eval, stride);
  std::vector<double> b{pb.head.b};
  auto eval_b = [&] {
    SegHeadT<double> h = pb.head;
    h.b = b[0];
    return pb.loss(pb.adapters, h);
  };
  out["head.b"] = check_vector(b, {g.head_b}, eval_b);
  return out;
}

}  // namespace adapts::testing
