// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"

namespace adapts {

namespace {

float choose_scale(float max_abs) {
  if (max_abs == 0.0f) return 1.0f;
  const float c0 = max_abs / kQuantMax;
  if (c0 * kQuantMax == max_abs) return c0;
  float up = c0, down = c0;
  for (int i = 0; i < 4; ++i) {
    up = std::nextafter(up, INFINITY);
    if (up * kQuantMax == max_abs) return up;
    down = std::nextafter(down, 0.0f);
    if (down * kQuantMax == max_abs) return down;
  }
  return c0;
}

}  // namespace

QuantizedTensor quantize_tensor(std::span<const float> w) {
  float max_abs = 0.0f;
  for (float v : w) {
    if (!std::isfinite(v)) throw Error("quantize: non-finite weight");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  QuantizedTensor q;
  q.scale = choose_scale(max_abs);
  q.data.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    // Nearest level in exact arithmetic (lower level on ties); level*scale
    // is exact in double.
    const double t = static_cast<double>(w[i]) / q.scale;
    const double lo = std::clamp(std::floor(t), -double(kQuantMax),
                                 double(kQuantMax));
    const double hi = std::min(lo + 1.0, double(kQuantMax));
    auto err = [&](double level) {
      return std::abs(static_cast<double>(w[i]) - level * q.scale);
    };
    q.data[i] = static_cast<std::int8_t>(err(hi) < err(lo) ? hi : lo);
  }
  return q;
}

std::vector<float> dequantize_tensor(const QuantizedTensor& q) {
  std::vector<float> out(q.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.scale * q.data[i];
  return out;
}

namespace {

void fake_quantize(std::vector<float>& w) {
  w = dequantize_tensor(quantize_tensor(w));
}

struct ParamField {
  const char* name;
  std::vector<float> AdapterParams::*member;
  bool is_bias;
};

constexpr ParamField kFields[] = {
    {"w1", &AdapterParams::w1, false},
    {"b1", &AdapterParams::b1, true},
    {"w2", &AdapterParams::w2, false},
    {"b2", &AdapterParams::b2, true},
    {"bn_gamma", &AdapterParams::bn_gamma, false},
    {"bn_beta", &AdapterParams::bn_beta, false},
    {"bn_mean", &AdapterParams::bn_mean, false},
    {"bn_var", &AdapterParams::bn_var, false},
};

std::vector<std::int64_t> field_shape(const AdapterParams& p,
                                      const std::string& name) {
  if (name == "w1") return {p.latent, p.channels};
  if (name == "w2") return {p.channels, p.latent};
  if (name == "b2") return {p.channels};
  return {p.latent};
}

}  // namespace

AdapterSet quantize_adapter_set(const AdapterSet& set) {
  AdapterSet out = set;
  out.precision = Precision::kInt8;
  for (auto& [layer, p] : out.per_layer) {
    for (const ParamField& f : kFields) {
      if (!f.is_bias) fake_quantize(p.*f.member);
    }
  }
  return out;
}

void save_adapter_set(const AdapterSet& set, const std::filesystem::path& dir) {
  WeightContainer c;
  auto& meta = c.metadata();
  meta["kind"] = "adapter_set";
  meta["adapter"] = set.kind.name();
  meta["precision"] = precision_name(set.precision);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [layer, p] : set.per_layer) {
    layers.push_back({{"layer", layer},
                      {"channels", p.channels},
                      {"latent", p.latent}});
    const std::string prefix = "layer" + std::to_string(layer) + ".";
    for (const ParamField& f : kFields) {
      const auto& values = p.*f.member;
      const auto shape = field_shape(p, f.name);
      if (set.precision == Precision::kInt8 && !f.is_bias) {
        const QuantizedTensor q = quantize_tensor(values);
        c.put_i8(prefix + f.name, shape, q.data, q.scale);
      } else {
        c.put_f32(prefix + f.name, shape, values);
      }
    }
  }
  meta["layers"] = layers;
  c.save(dir);
}

AdapterSet load_adapter_set(const std::filesystem::path& dir) {
  const WeightContainer c = WeightContainer::load(dir);
  const auto& meta = c.metadata();
  AdapterSet set;
  try {
    if (meta.at("kind").get<std::string>() != "adapter_set") {
      throw LoadError("not an adapter set: " + dir.string());
    }
    set.kind = AdapterKind::parse(meta.at("adapter").get<std::string>());
    set.precision = parse_precision(meta.at("precision").get<std::string>());
    for (const auto& entry : meta.at("layers")) {
      AdapterParams p;
      const int layer = entry.at("layer").get<int>();
      p.channels = entry.at("channels").get<int>();
      p.latent = entry.at("latent").get<int>();
      if (p.latent != latent_dim(set.kind, p.channels)) {
        throw LoadError("adapter layer " + std::to_string(layer) +
                        ": latent width does not match kind");
      }
      const std::string prefix = "layer" + std::to_string(layer) + ".";
      for (const ParamField& f : kFields) {
        const std::string name = prefix + f.name;
        const StoredTensor& t = c.get(name);
        const auto shape = field_shape(p, f.name);
        if (t.shape != shape) {
          throw LoadError("shape mismatch for tensor '" + name + "'");
        }
        if (t.dtype == DType::kI8) {
          p.*f.member = dequantize_tensor({t.i8, t.scale});
        } else {
          p.*f.member = t.f32;
        }
      }
      set.per_layer.emplace(layer, std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed adapter manifest in " + dir.string() + ": " +
                    e.what());
  }
  return set;
}

}  // namespace adapts
