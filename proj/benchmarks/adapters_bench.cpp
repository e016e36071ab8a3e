// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "adapts/adapters.hpp"
#include "adapts/backbone.hpp"
#include "adapts/rng.hpp"

namespace adapts {
namespace {

Tensor<float> random_features(Shape3 shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

Image random_image(std::uint64_t seed) {
  Rng rng(seed);
  Image img(3, 64, 64);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_AdapterForward(benchmark::State& state) {
  const int channels = static_cast<int>(state.range(0));
  const AdapterParams p = init_adapter(AdapterKind::linear(), channels, 1);
  const auto x = random_features({channels, 16, 16}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(adapter_forward(p, x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AdapterForward)->Arg(16)->Arg(64)->Arg(256);

void BM_BackboneFeatures(benchmark::State& state) {
  const Backbone b = make_toy_backbone(0, toy_backbone_spec());
  const Image x = random_image(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(b.forward_features(x, {1, 2, 3}));
  }
}
BENCHMARK(BM_BackboneFeatures);

}  // namespace
}  // namespace adapts
