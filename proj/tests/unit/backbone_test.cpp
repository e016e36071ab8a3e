// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"
#include "test_support.hpp"

namespace adapts {
namespace {

TEST(BackboneSpecTest, ToyStageShapes) {
  const BackboneSpec s = toy_backbone_spec();
  EXPECT_EQ(s.stage_shape(1), (Shape3{16, 32, 32}));
  EXPECT_EQ(s.stage_shape(2), (Shape3{32, 16, 16}));
  EXPECT_EQ(s.stage_shape(3), (Shape3{64, 8, 8}));
}

TEST(BackboneSpecTest, WideResNetChannels) {
  const BackboneSpec s = wide_resnet50_2_spec();
  EXPECT_EQ(s.channels(1), 256);
  EXPECT_EQ(s.channels(2), 512);
  EXPECT_EQ(s.channels(3), 1024);
  EXPECT_EQ(s.embed_dim, 2048);
  EXPECT_EQ(s.stage_shape(3), (Shape3{1024, 16, 16}));
}

TEST(BackboneSpecTest, ValidationErrors) {
  BackboneSpec s = toy_backbone_spec();
  s.tap_layers = {2, 1};
  EXPECT_THROW(s.validate(), ConfigError);
  s = toy_backbone_spec();
  s.tap_layers = {4};
  EXPECT_THROW(s.validate(), ConfigError);
  s = toy_backbone_spec();
  s.embed_dim = 32;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(backbone_spec_by_name("resnet18"), ConfigError);
}

TEST(BackboneSpecTest, ShapeLawAcrossRandomSpecs) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    BackboneSpec s;
    const int n = 1 + static_cast<int>(rng.below(4));
    int total_stride = 1;
    for (int i = 0; i < n; ++i) {
      const int stride = 1 + static_cast<int>(rng.below(2));
      s.stages.push_back({1 + static_cast<int>(rng.below(8)), stride});
      s.tap_layers.push_back(i + 1);
      total_stride *= stride;
    }
    s.input_height = total_stride * (1 + static_cast<int>(rng.below(12)));
    s.input_width = total_stride * (1 + static_cast<int>(rng.below(12)));
    s.embed_dim = s.stages.back().channels;
    s.validate();
    int h = s.input_height, w = s.input_width;
    for (int i = 0; i < n; ++i) {
      h = conv_out_dim(h, s.stages[i].stride);
      w = conv_out_dim(w, s.stages[i].stride);
      EXPECT_EQ(s.stage_shape(i + 1), (Shape3{s.stages[i].channels, h, w}));
    }
  }
  BackboneSpec odd = toy_backbone_spec();
  odd.input_height = 62;
  EXPECT_THROW(odd.validate(), ConfigError);
}

TEST(BackboneTest, SeededChecksums) {
  const auto spec = toy_backbone_spec();
  EXPECT_EQ(make_toy_backbone(7, spec).checksum(),
            make_toy_backbone(7, spec).checksum());
  EXPECT_NE(make_toy_backbone(7, spec).checksum(),
            make_toy_backbone(8, spec).checksum());
}

TEST(BackboneTest, FeaturesHaveSpecShapesAndAreDeterministic) {
  const Backbone b = make_toy_backbone(1, toy_backbone_spec());
  const Image x = testing::random_image(64, 64, 3);
  const auto f = b.forward_features(x, {1, 2, 3});
  ASSERT_EQ(f.size(), 3u);
  for (int l = 1; l <= 3; ++l) {
    EXPECT_EQ(f.at(l).shape(), b.spec().stage_shape(l));
    EXPECT_TRUE(f.at(l).all_finite());
  }
  EXPECT_EQ(b.forward_features(x, {1, 2, 3}), f);
  const auto only2 = b.forward_features(x, {2});
  EXPECT_EQ(only2.size(), 1u);
  EXPECT_EQ(only2.at(2), f.at(2));
}

TEST(BackboneTest, ZeroImageIsFinite) {
  const Backbone b = make_toy_backbone(1, toy_backbone_spec());
  const auto f = b.forward_features(Image(3, 64, 64), {1, 2, 3});
  for (const auto& [l, t] : f) EXPECT_TRUE(t.all_finite());
}

TEST(BackboneTest, WrongInputSizeThrows) {
  const Backbone b = make_toy_backbone(1, toy_backbone_spec());
  EXPECT_THROW(b.forward_features(Image(3, 32, 32), {1}), ShapeError);
}

TEST(BackboneTest, EmbeddingIsPooledFinalStage) {
  const Backbone b = make_toy_backbone(1, toy_backbone_spec());
  const Image x = testing::random_image(64, 64, 3);
  const auto e = b.forward_embedding(x);
  ASSERT_EQ(e.size(), 64u);
  EXPECT_EQ(e, global_average_pool(b.forward_features(x, {3}).at(3)));
  EXPECT_NE(e, b.forward_embedding(testing::random_image(64, 64, 4)));
  const Tensor<float> flat(3, 2, 2, 1.5f);
  EXPECT_EQ(global_average_pool(flat), (std::vector<float>{1.5f, 1.5f, 1.5f}));
}

TEST(BackboneIoTest, RoundTripGivesIdenticalOutputs) {
  const auto spec = toy_backbone_spec();
  const Backbone b = make_toy_backbone(3, spec);
  const auto dir = testing::temp_dir("backbone_rt");
  b.save(dir);
  const Backbone back = load_backbone(dir, spec);
  EXPECT_EQ(back.checksum(), b.checksum());
  const Image x = testing::random_image(64, 64, 5);
  EXPECT_EQ(back.forward_features(x, {1, 2, 3}), b.forward_features(x, {1, 2, 3}));
}

TEST(BackboneIoTest, MissingAndMisshapedTensors) {
  const auto spec = toy_backbone_spec();
  const auto dir = testing::temp_dir("backbone_bad");
  make_toy_backbone(3, spec).save(dir);
  WeightContainer c = WeightContainer::load(dir);

  WeightContainer missing;
  missing.metadata() = c.metadata();
  for (const auto& [name, t] : c.tensors()) {
    if (name.rfind("stage2.", 0) == 0) continue;
    missing.put_f32(name, t.shape, t.f32);
  }
  missing.save(dir / "missing");
  try {
    load_backbone(dir / "missing", spec);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("missing tensor"), std::string::npos);
  }

  BackboneSpec wide = spec;
  wide.stages[1].channels = 512;
  wide.stages[2].channels = 64;
  EXPECT_THROW(load_backbone(dir, wide), LoadError);
}

}  // namespace
}  // namespace adapts
