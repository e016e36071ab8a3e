// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Discardable 1x1-conv segmentation head and the segmentation losses used
// during adapter training.

#pragma once

#include <cstdint>
#include <vector>

#include "adapts/tensor.hpp"

namespace adapts {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDefaultFocalGamma = 2.0;

template <typename T>
struct SegHeadT {
  std::vector<T> w;  // one weight per diff-tensor channel
  T b = T(0);

  template <typename U>
  SegHeadT<U> cast() const {
    return {std::vector<U>(w.begin(), w.end()), static_cast<U>(b)};
  }
};

using SegHead = SegHeadT<float>;

// Small seeded random weights and a negative bias (low prior anomaly
// probability).
SegHead init_seg_head(int channels, std::uint64_t seed);

// Y(h,w) = sigmoid(<w, d(:,h,w)> + b).
template <typename T>
Field<T> seg_forward(const SegHeadT<T>& head, const Tensor<T>& d);

// Area downsampling followed by binarization (strictly > 0.5 -> 1).
Mask downsample_mask(const Mask& mask, int out_h, int out_w);

// Mean focal loss with p = M*Y + (1-M)*(1-Y), Y clamped to
// [1e-7, 1 - 1e-7].
template <typename T>
double focal_loss(const Field<T>& pred, const Mask& mask, double gamma);

template <typename T>
double l1_loss(const Field<T>& pred, const Mask& mask);

// dL/dY of the two losses (zero where the clamp is active for focal).
template <typename T>
Field<T> focal_loss_grad(const Field<T>& pred, const Mask& mask, double gamma);
template <typename T>
Field<T> l1_loss_grad(const Field<T>& pred, const Mask& mask);

struct LossBreakdown {
  double stfpm = 0;
  double focal = 0;
  double l1 = 0;
  double total = 0;
};

// Full training objective for one sample: matching loss plus focal and L1
// on the head's prediction. `mask` is at input resolution (all zeros for
// clean samples); it is downsampled to the diff-tensor resolution.
template <typename T>
LossBreakdown total_loss(const FeaturePyramid<T>& ft,
                         const FeaturePyramid<T>& fs, const SegHeadT<T>& head,
                         const Mask& mask, double gamma);

}  // namespace adapts
