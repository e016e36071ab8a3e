// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// 8-bit PNG reading and writing. Images are float RGB in [0,1].

#pragma once

#include <filesystem>
#include <utility>

#include "adapts/tensor.hpp"

namespace adapts {

// Any PNG color type is converted to RGB. Throws IoError.
Image read_png(const std::filesystem::path& path);
// Reads only the header. Returns {height, width}.
std::pair<int, int> png_size(const std::filesystem::path& path);

// Grayscale read; pixels >= 128 become 1.
Mask read_mask_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& image);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
// Gray heatmap scaled so that `max_value` maps to 255 (values clipped).
void write_heatmap_png(const std::filesystem::path& path,
                       const FloatField& map, float max_value);

// Bilinear resize to the network input size (no-op when already sized).
Image preprocess(const Image& image, int height, int width);

}  // namespace adapts
