// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for unit tests.

#pragma once

#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/rng.hpp"
#include "adapts/tensor.hpp"

namespace adapts::testing {

inline Image random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(3, h, w);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

template <typename T>
Tensor<T> random_tensor(Shape3 shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor<T> t(shape);
  for (T& v : t.values()) v = static_cast<T>(scale * rng.normal());
  return t;
}

inline BackboneSpec small_toy_spec(int size) {
  BackboneSpec s = toy_backbone_spec();
  s.input_height = size;
  s.input_width = size;
  return s;
}

// Moves every parameter of an adapter away from its structured init.
inline void perturb(AdapterParams& p, std::uint64_t seed, double scale = 0.1) {
  Rng rng(seed);
  auto jitter = [&](std::vector<float>& v) {
    for (float& x : v) x += static_cast<float>(scale * rng.normal());
  };
  jitter(p.w1);
  jitter(p.b1);
  jitter(p.w2);
  jitter(p.b2);
  jitter(p.bn_gamma);
  jitter(p.bn_beta);
  jitter(p.bn_mean);
  for (float& v : p.bn_var) v = static_cast<float>(0.5 + rng.uniform());
}

// Owning copy of a tensor or field's values, safe to iterate over even when
// the source is a temporary.
template <typename T>
auto copy_values(const T& t) {
  const auto v = t.values();
  return std::vector<std::remove_cv_t<typename decltype(v)::element_type>>(
      v.begin(), v.end());
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("adapts_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace adapts::testing
