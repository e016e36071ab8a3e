// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Student pathway over the shared frozen backbone, feature matching loss,
// and inference-time anomaly maps.

#pragma once

#include <set>
#include <vector>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/tensor.hpp"

namespace adapts {

// Denominator guard of the channel-wise normalization.
inline constexpr double kNormEps = 1e-12;

// Teacher backbone with adapters injected after the stages they are keyed
// by. Holds references; both must outlive the path.
class StudentPath {
 public:
  StudentPath(const Backbone& backbone, const AdapterSet& adapters);

  const Backbone& backbone() const { return *backbone_; }
  const AdapterSet& adapters() const { return *adapters_; }

 private:
  const Backbone* backbone_;
  const AdapterSet* adapters_;
};

// Throws ShapeError/ConfigError when an adapter sits on a non-tap stage or
// its channel count differs from the stage output.
void validate_adapters(const BackboneSpec& spec, const AdapterSet& adapters);

// Eval-mode student features. Each adapter-equipped stage output is
// replaced by the adapter output before feeding the next stage.
FeaturePyramid<float> student_forward(const StudentPath& sp, const Image& x,
                                      const std::set<int>& taps);

// Batch student forward. Train mode uses batch BN statistics and updates
// the running statistics of `adapters`.
std::vector<FeaturePyramid<float>> student_forward(
    const Backbone& backbone, AdapterSet& adapters,
    const std::vector<Image>& batch, const std::set<int>& taps, BnMode mode);

// Divides every spatial channel vector by its Euclidean norm (guarded).
template <typename T>
Tensor<T> channel_normalize(const Tensor<T>& f);

// Sum over layers of ||phi(Ft) - phi(Fs)||^2 / (H_l * W_l) for one item.
template <typename T>
double stfpm_loss(const FeaturePyramid<T>& ft, const FeaturePyramid<T>& fs);

// Batch mean of the per-item loss.
template <typename T>
double stfpm_loss(const std::vector<FeaturePyramid<T>>& ft,
                  const std::vector<FeaturePyramid<T>>& fs);

// Per-location squared distance between normalized channel vectors, in
// [0, 4].
template <typename T>
Field<T> layer_diff_map(const Tensor<T>& ft, const Tensor<T>& fs);

enum class Combine { kSum, kProduct };

std::string combine_name(Combine c);
Combine parse_combine(const std::string& s);

struct AnomalyMap {
  FloatField map;  // input resolution, non-negative
  float image_score = 0.0f;
};

// Upsamples each layer map to out size, combines, smooths, and takes the
// maximum as image score.
AnomalyMap anomaly_map(const FeaturePyramid<float>& ft,
                       const FeaturePyramid<float>& fs, int out_h, int out_w,
                       Combine combine, double smooth_sigma);

// Normalized per-channel differences upsampled to the finest tap
// resolution and concatenated along channels (ascending stage order).
template <typename T>
Tensor<T> diff_tensor(const FeaturePyramid<T>& ft, const FeaturePyramid<T>& fs);

}  // namespace adapts
