// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Perlin-noise anomaly synthesis: gradient-noise fields, thresholded masks,
// and texture blending onto normal images.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "adapts/rng.hpp"
#include "adapts/tensor.hpp"

namespace adapts {

struct PerlinConfig {
  // Lattice resolution per axis is 2^k with k drawn from this range.
  int min_scale_exp = 1;
  int max_scale_exp = 4;
  int octaves = 1;
  double persistence = 0.5;
  double threshold = 0.5;
  double beta_min = 0.15;
  double beta_max = 1.0;
  bool rotation = true;
  // Masks covering more than this fraction of pixels are resampled.
  double max_coverage = 0.9;
  int max_attempts = 64;

  void validate() const;
};

struct SyntheticSample {
  Image image;
  Mask mask;
};

// Classic 2D gradient noise on an (rh+1) x (rw+1) lattice with quintic
// fade. Zero on lattice points, values in [-1, 1].
FloatField perlin_noise(int h, int w, std::pair<int, int> res,
                        std::uint64_t seed);

// Multi-octave noise with lattice resolution base_res * 2^o at octave o,
// min-max normalized to [0, 1] (constant fields become all zeros).
FloatField fractal_perlin(int h, int w, std::pair<int, int> base_res,
                          int octaves, double persistence, std::uint64_t seed);

// Draws the base resolution and optional 90-degree rotation from `rng`.
FloatField fractal_perlin(int h, int w, const PerlinConfig& cfg, Rng& rng);

// 1 where field > threshold.
Mask make_mask(const FloatField& field, double threshold);

// Draws Perlin masks until one is non-empty and covers at most
// cfg.max_coverage of the image. Throws ConfigError after max_attempts.
Mask sample_mask(int h, int w, const PerlinConfig& cfg, Rng& rng);

// x_aug = (1-m)*x + m*(beta*t + (1-beta)*x), clipped to [0,1].
SyntheticSample synthesize_anomaly(const Image& x, const Image& texture,
                                   const Mask& mask, double beta);

// Texture provider: an explicit bank of images, or self-augmentation of the
// input (color jitter plus a random shuffle of image patches).
struct TextureSource {
  bool use_bank = false;
  std::vector<Image> bank;
  int shuffle_grid = 4;  // patches per axis for self-augmentation
};

Image self_augment(const Image& x, Rng& rng, int grid = 4);
Image sample_texture(const TextureSource& source, const Image& x, Rng& rng);

// Full pipeline: mask, texture, and opacity from one seeded stream.
SyntheticSample synthesize(const Image& x, const PerlinConfig& cfg,
                           const TextureSource& textures, std::uint64_t seed);

}  // namespace adapts
