// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "adapts/ops.hpp"
#include "adapts/tensor.hpp"

namespace adapts {

struct StageSpec {
  int channels = 0;
  int stride = 1;  // spatial downsampling factor of this stage
};

struct BackboneSpec {
  std::string name;
  std::vector<StageSpec> stages;
  std::vector<int> tap_layers;  // 1-based stage indices, ascending
  int embed_dim = 0;
  int input_height = 0;
  int input_width = 0;
  std::array<float, 3> mean{0.5f, 0.5f, 0.5f};
  std::array<float, 3> stdev{0.5f, 0.5f, 0.5f};

  // Throws ConfigError describing the first violated invariant.
  void validate() const;
  int num_stages() const { return static_cast<int>(stages.size()); }
  // Output shape of 1-based stage `stage` for the configured input size.
  Shape3 stage_shape(int stage) const;
  int channels(int stage) const { return stages.at(stage - 1).channels; }
  bool is_tap(int stage) const;
};

// 3 stages, channels (16, 32, 64), stride 2 each, embed 64, input 64x64.
BackboneSpec toy_backbone_spec();

// Channel layout of WideResNet50-2 (layers 1-4), used for memory accounting.
BackboneSpec wide_resnet50_2_spec();

// Looks up a named spec ("toy" or "wide_resnet50_2"); throws ConfigError.
BackboneSpec backbone_spec_by_name(const std::string& name);

// One residual stage: a strided 3x3 projection followed by a residual 3x3
// refinement, both with ReLU:
//   h = relu(down(x)),  out = relu(h + refine(h)).
struct Stage {
  Conv3x3 down;
  Conv3x3 refine;
};

// Activations recorded by a forward pass for later backpropagation.
template <typename T>
struct StageTrace {
  Shape3 input_shape;
  Tensor<T> hidden;  // relu(down(x))
  Tensor<T> output;  // relu(hidden + refine(hidden))
};

// Frozen feature extractor. Immutable after construction; all forward
// methods are const and safe to call concurrently.
class Backbone {
 public:
  Backbone(BackboneSpec spec, std::vector<Stage> stages);

  const BackboneSpec& spec() const { return spec_; }
  const std::vector<Stage>& stages() const { return stages_; }

  // Applies the per-channel standardization. Image must be 3 x H x W at the
  // configured input size with values in [0, 1].
  template <typename T>
  Tensor<T> standardize(const Image& image) const;

  // Runs 1-based stage `stage` on its input. Records a trace when given.
  template <typename T>
  Tensor<T> stage_forward(int stage, const Tensor<T>& input,
                          StageTrace<T>* trace = nullptr) const;

  // Gradient of the stage output w.r.t. its input. Weights are frozen, so
  // no parameter gradients are produced.
  template <typename T>
  Tensor<T> stage_backward(int stage, const StageTrace<T>& trace,
                           const Tensor<T>& grad_output) const;

  // Teacher features at the requested taps (subset of spec().tap_layers).
  FeaturePyramid<float> forward_features(const Image& image,
                                         const std::set<int>& taps) const;
  std::vector<FeaturePyramid<float>> forward_features(
      const std::vector<Image>& batch, const std::set<int>& taps) const;

  // Global-average-pooled output of the final stage (pre-head embedding).
  std::vector<float> forward_embedding(const Image& image) const;

  std::size_t param_count() const;
  std::size_t memory_bytes() const { return param_count() * 4; }

  // SHA-256 over all weights in a fixed order.
  std::string checksum() const;

  void save(const std::filesystem::path& dir) const;

 private:
  void check_input(const Image& image) const;

  BackboneSpec spec_;
  std::vector<Stage> stages_;
};

// Seeded He-initialized backbone; identical seeds give bit-identical weights.
Backbone make_toy_backbone(std::uint64_t seed, const BackboneSpec& spec);

// Loads weights from a container written by Backbone::save. Throws LoadError
// naming the missing or mis-shaped tensor.
Backbone load_backbone(const std::filesystem::path& dir,
                       const BackboneSpec& spec);

// Spatial mean of each channel.
template <typename T>
std::vector<T> global_average_pool(const Tensor<T>& t);

}  // namespace adapts
