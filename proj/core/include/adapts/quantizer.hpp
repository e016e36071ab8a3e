// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Symmetric per-tensor int8 post-training quantization of adapter sets,
// and adapter-set persistence in the weight container.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adapts/adapters.hpp"

namespace adapts {

inline constexpr int kQuantMax = 127;

struct QuantizedTensor {
  std::vector<std::int8_t> data;
  float scale = 1.0f;
};

// scale = max|w| / 127 (1 for an all-zero tensor), data = round(w / scale)
// clamped to [-127, 127]. The scale is nudged by a few ulps when needed so
// that scale * 127 reproduces max|w| exactly, which makes
// quantize(dequantize(q)) == q. Throws Error on non-finite input.
QuantizedTensor quantize_tensor(std::span<const float> w);
std::vector<float> dequantize_tensor(const QuantizedTensor& q);

// Returns the set with precision int8 and every quantized tensor replaced by
// its dequantized value (arithmetic stays float). Conv biases stay float32.
AdapterSet quantize_adapter_set(const AdapterSet& set);

// Per-layer tensor names are "layerN.<field>"; int8 sets store i8 payloads
// with per-tensor scales.
void save_adapter_set(const AdapterSet& set, const std::filesystem::path& dir);
AdapterSet load_adapter_set(const std::filesystem::path& dir);

}  // namespace adapts
