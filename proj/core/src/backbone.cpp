// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"
#include "adapts/rng.hpp"

namespace adapts {

void BackboneSpec::validate() const {
  if (stages.empty()) throw ConfigError("backbone spec has no stages");
  if (input_height <= 0 || input_width <= 0) {
    throw ConfigError("backbone input size must be positive");
  }
  int fh = input_height, fw = input_width;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (s.channels <= 0) {
      throw ConfigError("stage " + std::to_string(i + 1) +
                        " has zero channels");
    }
    if (s.stride <= 0) {
      throw ConfigError("stage " + std::to_string(i + 1) +
                        " has a non-positive stride");
    }
    if (fh % s.stride != 0 || fw % s.stride != 0) {
      throw ConfigError("stage " + std::to_string(i + 1) +
                        ": spatial dims " + std::to_string(fh) + "x" +
                        std::to_string(fw) + " not divisible by stride " +
                        std::to_string(s.stride));
    }
    fh /= s.stride;
    fw /= s.stride;
  }
  if (tap_layers.empty()) throw ConfigError("tap_layers is empty");
  if (!std::is_sorted(tap_layers.begin(), tap_layers.end()) ||
      std::adjacent_find(tap_layers.begin(), tap_layers.end()) !=
          tap_layers.end()) {
    throw ConfigError("tap_layers must be strictly ascending");
  }
  for (int t : tap_layers) {
    if (t < 1 || t > num_stages()) {
      throw ConfigError("tap layer " + std::to_string(t) +
                        " is not a valid stage index");
    }
  }
  if (embed_dim != stages.back().channels) {
    throw ConfigError("embed_dim must equal the final stage channel count");
  }
  for (float s : stdev) {
    if (!(s > 0)) throw ConfigError("standardization std must be positive");
  }
}

Shape3 BackboneSpec::stage_shape(int stage) const {
  if (stage < 1 || stage > num_stages()) {
    throw ConfigError("invalid stage index " + std::to_string(stage));
  }
  int h = input_height, w = input_width;
  for (int i = 0; i < stage; ++i) {
    h /= stages[i].stride;
    w /= stages[i].stride;
  }
  return {stages[stage - 1].channels, h, w};
}

bool BackboneSpec::is_tap(int stage) const {
  return std::find(tap_layers.begin(), tap_layers.end(), stage) !=
         tap_layers.end();
}

BackboneSpec toy_backbone_spec() {
  BackboneSpec s;
  s.name = "toy";
  s.stages = {{16, 2}, {32, 2}, {64, 2}};
  s.tap_layers = {1, 2, 3};
  s.embed_dim = 64;
  s.input_height = 64;
  s.input_width = 64;
  return s;
}

BackboneSpec wide_resnet50_2_spec() {
  BackboneSpec s;
  s.name = "wide_resnet50_2";
  s.stages = {{256, 4}, {512, 2}, {1024, 2}, {2048, 2}};
  s.tap_layers = {1, 2, 3};
  s.embed_dim = 2048;
  s.input_height = 256;
  s.input_width = 256;
  s.mean = {0.485f, 0.456f, 0.406f};
  s.stdev = {0.229f, 0.224f, 0.225f};
  return s;
}

BackboneSpec backbone_spec_by_name(const std::string& name) {
  if (name == "toy") return toy_backbone_spec();
  if (name == "wide_resnet50_2") return wide_resnet50_2_spec();
  throw ConfigError("unknown backbone spec '" + name + "'");
}

Backbone::Backbone(BackboneSpec spec, std::vector<Stage> stages)
    : spec_(std::move(spec)), stages_(std::move(stages)) {
  spec_.validate();
  if (static_cast<int>(stages_.size()) != spec_.num_stages()) {
    throw ConfigError("stage weight count does not match spec");
  }
  int in_ch = 3;
  for (int i = 0; i < spec_.num_stages(); ++i) {
    const Stage& st = stages_[i];
    const int c = spec_.stages[i].channels;
    if (st.down.in_channels != in_ch || st.down.out_channels != c ||
        st.down.stride != spec_.stages[i].stride ||
        st.refine.in_channels != c || st.refine.out_channels != c ||
        st.refine.stride != 1) {
      throw ShapeError("stage " + std::to_string(i + 1) +
                       " weights do not match spec");
    }
    in_ch = c;
  }
}

void Backbone::check_input(const Image& image) const {
  if (image.channels() != 3 || image.height() != spec_.input_height ||
      image.width() != spec_.input_width) {
    throw ShapeError("backbone expects 3x" +
                     std::to_string(spec_.input_height) + "x" +
                     std::to_string(spec_.input_width) + " input, got " +
                     to_string(image.shape()));
  }
}

template <typename T>
Tensor<T> Backbone::standardize(const Image& image) const {
  check_input(image);
  Tensor<T> out(image.shape());
  for (int c = 0; c < 3; ++c) {
    const T m = static_cast<T>(spec_.mean[c]);
    const T s = static_cast<T>(spec_.stdev[c]);
    auto src = image.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = (static_cast<T>(src[i]) - m) / s;
    }
  }
  return out;
}

template <typename T>
Tensor<T> Backbone::stage_forward(int stage, const Tensor<T>& input,
                                  StageTrace<T>* trace) const {
  const Stage& st = stages_.at(stage - 1);
  Tensor<T> hidden = conv3x3_forward(st.down, input);
  for (T& v : hidden.values()) v = std::max(v, T(0));
  Tensor<T> out = conv3x3_forward(st.refine, hidden);
  auto o = out.values();
  auto h = hidden.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = std::max(o[i] + h[i], T(0));
  }
  if (trace) {
    trace->input_shape = input.shape();
    trace->hidden = std::move(hidden);
    trace->output = out;
  }
  return out;
}

template <typename T>
Tensor<T> Backbone::stage_backward(int stage, const StageTrace<T>& trace,
                                   const Tensor<T>& grad_output) const {
  const Stage& st = stages_.at(stage - 1);
  Tensor<T> grad_pre = grad_output;
  {
    auto g = grad_pre.values();
    auto o = trace.output.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(o[i] > T(0))) g[i] = T(0);
    }
  }
  Tensor<T> grad_hidden =
      conv3x3_backward_input(st.refine, grad_pre, trace.hidden.shape());
  {
    auto gh = grad_hidden.values();
    auto gp = grad_pre.values();
    auto h = trace.hidden.values();
    for (std::size_t i = 0; i < gh.size(); ++i) {
      gh[i] = (h[i] > T(0)) ? gh[i] + gp[i] : T(0);
    }
  }
  return conv3x3_backward_input(st.down, grad_hidden, trace.input_shape);
}

FeaturePyramid<float> Backbone::forward_features(
    const Image& image, const std::set<int>& taps) const {
  for (int t : taps) {
    if (!spec_.is_tap(t)) {
      throw ConfigError("stage " + std::to_string(t) + " is not a tap layer");
    }
  }
  FeaturePyramid<float> out;
  if (taps.empty()) return out;
  const int last = *taps.rbegin();
  Tensor<float> x = standardize<float>(image);
  for (int s = 1; s <= last; ++s) {
    x = stage_forward(s, x);
    if (taps.count(s)) out[s] = x;
  }
  return out;
}

std::vector<FeaturePyramid<float>> Backbone::forward_features(
    const std::vector<Image>& batch, const std::set<int>& taps) const {
  std::vector<FeaturePyramid<float>> out;
  out.reserve(batch.size());
  for (const Image& img : batch) out.push_back(forward_features(img, taps));
  return out;
}

template <typename T>
std::vector<T> global_average_pool(const Tensor<T>& t) {
  std::vector<T> out(t.channels());
  for (int c = 0; c < t.channels(); ++c) {
    double acc = 0;
    for (T v : t.plane(c)) acc += v;
    out[c] = static_cast<T>(acc / (static_cast<double>(t.height()) * t.width()));
  }
  return out;
}

std::vector<float> Backbone::forward_embedding(const Image& image) const {
  Tensor<float> x = standardize<float>(image);
  for (int s = 1; s <= spec_.num_stages(); ++s) x = stage_forward(s, x);
  return global_average_pool(x);
}

std::size_t Backbone::param_count() const {
  std::size_t n = 0;
  for (const Stage& st : stages_) {
    n += st.down.param_count() + st.refine.param_count();
  }
  return n;
}

namespace {

std::vector<std::int64_t> conv_weight_shape(const Conv3x3& c) {
  return {c.out_channels, c.in_channels, 3, 3};
}

std::string stage_prefix(int i) { return "stage" + std::to_string(i + 1); }

}  // namespace

std::string Backbone::checksum() const {
  std::vector<std::uint8_t> bytes;
  auto append = [&](const std::vector<float>& v) {
    auto p = reinterpret_cast<const std::uint8_t*>(v.data());
    bytes.insert(bytes.end(), p, p + v.size() * sizeof(float));
  };
  for (const Stage& st : stages_) {
    append(st.down.weight);
    append(st.down.bias);
    append(st.refine.weight);
    append(st.refine.bias);
  }
  return sha256_hex(bytes);
}

void Backbone::save(const std::filesystem::path& dir) const {
  WeightContainer c;
  for (int i = 0; i < spec_.num_stages(); ++i) {
    const Stage& st = stages_[i];
    const std::string p = stage_prefix(i);
    c.put_f32(p + ".down.weight", conv_weight_shape(st.down), st.down.weight);
    c.put_f32(p + ".down.bias", {st.down.out_channels}, st.down.bias);
    c.put_f32(p + ".refine.weight", conv_weight_shape(st.refine),
              st.refine.weight);
    c.put_f32(p + ".refine.bias", {st.refine.out_channels}, st.refine.bias);
  }
  c.metadata()["kind"] = "backbone";
  c.metadata()["spec"] = spec_.name;
  c.save(dir);
}

namespace {

Conv3x3 make_conv(int in, int out, int stride) {
  Conv3x3 c;
  c.in_channels = in;
  c.out_channels = out;
  c.stride = stride;
  c.weight.assign(static_cast<std::size_t>(in) * out * 9, 0.0f);
  c.bias.assign(out, 0.0f);
  return c;
}

}  // namespace

Backbone make_toy_backbone(std::uint64_t seed, const BackboneSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(seed, std::string_view("backbone")));
  std::vector<Stage> stages;
  int in_ch = 3;
  for (const StageSpec& s : spec.stages) {
    Stage st{make_conv(in_ch, s.channels, s.stride),
             make_conv(s.channels, s.channels, 1)};
    const double down_std = std::sqrt(2.0 / (in_ch * 9));
    // The refinement branch is scaled down so the residual sum keeps a
    // bounded activation scale across stages.
    const double refine_std = 0.5 * std::sqrt(2.0 / (s.channels * 9));
    for (float& w : st.down.weight) w = static_cast<float>(rng.normal() * down_std);
    for (float& b : st.down.bias) b = static_cast<float>(rng.uniform(-0.1, 0.1));
    for (float& w : st.refine.weight) {
      w = static_cast<float>(rng.normal() * refine_std);
    }
    for (float& b : st.refine.bias) {
      b = static_cast<float>(rng.uniform(-0.1, 0.1));
    }
    stages.push_back(std::move(st));
    in_ch = s.channels;
  }
  return Backbone(spec, std::move(stages));
}

Backbone load_backbone(const std::filesystem::path& dir,
                       const BackboneSpec& spec) {
  spec.validate();
  const WeightContainer c = WeightContainer::load(dir);
  std::vector<Stage> stages;
  int in_ch = 3;
  for (int i = 0; i < spec.num_stages(); ++i) {
    const int ch = spec.stages[i].channels;
    Stage st{make_conv(in_ch, ch, spec.stages[i].stride),
             make_conv(ch, ch, 1)};
    const std::string p = stage_prefix(i);
    st.down.weight = c.expect_f32(p + ".down.weight", conv_weight_shape(st.down));
    st.down.bias = c.expect_f32(p + ".down.bias", {ch});
    st.refine.weight =
        c.expect_f32(p + ".refine.weight", conv_weight_shape(st.refine));
    st.refine.bias = c.expect_f32(p + ".refine.bias", {ch});
    stages.push_back(std::move(st));
    in_ch = ch;
  }
  return Backbone(spec, std::move(stages));
}

template Tensor<float> Backbone::standardize<float>(const Image&) const;
template Tensor<double> Backbone::standardize<double>(const Image&) const;
template Tensor<float> Backbone::stage_forward<float>(int, const Tensor<float>&,
                                                      StageTrace<float>*) const;
template Tensor<double> Backbone::stage_forward<double>(
    int, const Tensor<double>&, StageTrace<double>*) const;
template Tensor<float> Backbone::stage_backward<float>(
    int, const StageTrace<float>&, const Tensor<float>&) const;
template Tensor<double> Backbone::stage_backward<double>(
    int, const StageTrace<double>&, const Tensor<double>&) const;
template std::vector<float> global_average_pool<float>(const Tensor<float>&);
template std::vector<double> global_average_pool<double>(const Tensor<double>&);

}  // namespace adapts
