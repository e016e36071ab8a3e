// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Batch training objective with analytic gradients for adapter and
// segmentation-head parameters. Gradients flow from every tap back through
// the frozen stages to the earliest adapter.

#pragma once

#include <map>
#include <vector>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/seg_guidance.hpp"

namespace adapts {

template <typename T>
struct ObjectiveGrads {
  std::map<int, AdapterGrads<T>> adapters;
  std::vector<T> head_w;
  T head_b = T(0);
};

struct ObjectiveOptions {
  double gamma = kDefaultFocalGamma;
  BnMode bn_mode = BnMode::kTrain;
};

// Mean over the batch of stfpm + focal + l1. In train mode the running BN
// statistics of `adapters` are updated. When `grads` is non-null it is
// (re)initialized and filled with d(mean loss)/d(parameter).
template <typename T>
LossBreakdown compute_objective(const Backbone& backbone,
                                std::map<int, AdapterParamsT<T>>& adapters,
                                const SegHeadT<T>& head,
                                const std::vector<Image>& images,
                                const std::vector<Mask>& masks,
                                const ObjectiveOptions& options,
                                ObjectiveGrads<T>* grads);

}  // namespace adapts
