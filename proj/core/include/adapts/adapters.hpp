// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Residual 1x1-conv adapters:
//
//   y = x + W2 * relu(BN(W1 * x + b1)) + b2
//
// with a latent width chosen by the adapter variant, plus exact parameter
// and memory accounting.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adapts/tensor.hpp"

namespace adapts {

enum class AdapterVariant { kLinear, kBottleneck, kExpansion };

struct AdapterKind {
  AdapterVariant variant = AdapterVariant::kLinear;
  // Reduction factor R in (0,1) for bottleneck, expansion factor E > 1 for
  // expansion, unused for linear.
  double factor = 1.0;

  static AdapterKind linear() { return {AdapterVariant::kLinear, 1.0}; }
  static AdapterKind bottleneck(double r);
  static AdapterKind expansion(double e);

  // "linear", "bn25", "bn50", "exp2", or "bottleneck:<R>" / "expansion:<E>".
  std::string name() const;
  static AdapterKind parse(const std::string& name);

  friend bool operator==(const AdapterKind&, const AdapterKind&) = default;
};

int latent_dim(const AdapterKind& kind, int channels);

enum class Precision { kF32, kInt8 };

std::string precision_name(Precision p);
Precision parse_precision(const std::string& s);

enum class BnMode { kTrain, kEval };

inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEps = 1e-5;

template <typename T>
struct AdapterParamsT {
  int channels = 0;
  int latent = 0;
  std::vector<T> w1;  // latent x channels
  std::vector<T> b1;  // latent
  std::vector<T> w2;  // channels x latent
  std::vector<T> b2;  // channels
  std::vector<T> bn_gamma, bn_beta, bn_mean, bn_var;  // latent each
  T eps = static_cast<T>(kBnEps);
  T momentum = static_cast<T>(kBnMomentum);

  // W1, W2, b1, b2, gamma, beta, running mean, running var.
  std::size_t stored_param_count() const;

  template <typename U>
  AdapterParamsT<U> cast() const;

  friend bool operator==(const AdapterParamsT&, const AdapterParamsT&) =
      default;
};

using AdapterParams = AdapterParamsT<float>;

// Trainable-parameter gradients (running statistics are not trainable).
template <typename T>
struct AdapterGrads {
  std::vector<T> w1, b1, w2, b2, bn_gamma, bn_beta;

  explicit AdapterGrads(const AdapterParamsT<T>& p);
  AdapterGrads() = default;
  void zero();
};

// Activations needed for the backward pass over one batch.
template <typename T>
struct AdapterTrace {
  BnMode mode = BnMode::kEval;
  std::vector<Tensor<T>> input;
  std::vector<Tensor<T>> normalized;  // (z - mu) * inv_std, latent x H x W
  std::vector<Tensor<T>> bn_out;      // gamma * normalized + beta
  std::vector<T> inv_std;             // latent
};

struct AdapterSet {
  AdapterKind kind;
  Precision precision = Precision::kF32;
  std::map<int, AdapterParams> per_layer;  // 1-based stage -> params

  std::set<int> layers() const;
};

// Seeded He-normal W1/W2, zero biases, identity BN. Not an identity map.
AdapterParams init_adapter(const AdapterKind& kind, int channels,
                           std::uint64_t seed);

AdapterSet init_adapter_set(const AdapterKind& kind,
                            const std::map<int, int>& layer_channels,
                            std::uint64_t seed);

// Batch forward. In train mode BN uses batch statistics over N*H*W and the
// running statistics are updated with the configured momentum.
template <typename T>
std::vector<Tensor<T>> adapter_forward_batch(AdapterParamsT<T>& p,
                                             const std::vector<Tensor<T>>& x,
                                             BnMode mode,
                                             AdapterTrace<T>* trace = nullptr);

// Eval-mode forward of a single feature map; `p` is not modified.
template <typename T>
Tensor<T> adapter_forward(const AdapterParamsT<T>& p, const Tensor<T>& x);

// Single-sample forward in either mode (train mode treats the sample as a
// batch of one and updates running statistics).
Tensor<float> adapter_forward(AdapterParams& p, const Tensor<float>& x,
                              BnMode mode);

// Accumulates parameter gradients into `grads` and returns dL/dx per item.
template <typename T>
std::vector<Tensor<T>> adapter_backward_batch(
    const AdapterParamsT<T>& p, const AdapterTrace<T>& trace,
    const std::vector<Tensor<T>>& grad_out, AdapterGrads<T>& grads);

// --- Accounting ---------------------------------------------------------

// 2*C*C_latent + C_latent + C + 4*C_latent.
std::uint64_t stored_param_count(const AdapterKind& kind, int channels);
// Bias entries (b1 and b2): C_latent + C.
std::uint64_t bias_param_count(const AdapterKind& kind, int channels);

// Memory of one adapter. f32: 4 bytes per stored parameter. int8: biases
// stay float32, every other tensor is one byte per entry; per-tensor scales
// are not counted.
std::uint64_t adapter_memory_bytes(const AdapterKind& kind, int channels,
                                   Precision precision);

std::uint64_t adapter_param_count(const AdapterSet& set);
std::uint64_t adapter_memory_bytes(const AdapterSet& set);

// Planning variant that needs only channel counts.
std::uint64_t adapter_memory_bytes(const AdapterKind& kind,
                                   const std::vector<int>& channels,
                                   Precision precision);

inline constexpr double kBytesPerMiB = 1048576.0;

inline double to_mib(std::uint64_t bytes) { return bytes / kBytesPerMiB; }

// MiB truncated to two decimals, e.g. 10522624 -> "10.03".
std::string format_mib(std::uint64_t bytes);

}  // namespace adapts
