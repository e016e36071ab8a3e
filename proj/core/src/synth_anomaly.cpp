// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/synth_anomaly.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "adapts/errors.hpp"
#include "adapts/ops.hpp"

namespace adapts {

void PerlinConfig::validate() const {
  if (min_scale_exp < 0 || max_scale_exp < min_scale_exp) {
    throw ConfigError("perlin: invalid scale exponent range");
  }
  if (octaves < 1) throw ConfigError("perlin: octaves must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("perlin: threshold must be in (0,1)");
  }
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max <= 1.0)) {
    throw ConfigError("perlin: beta range must satisfy 0 < min <= max <= 1");
  }
  if (!(max_coverage > 0.0 && max_coverage <= 1.0)) {
    throw ConfigError("perlin: max_coverage must be in (0,1]");
  }
}

namespace {

inline double fade(double t) {
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

}  // namespace

FloatField perlin_noise(int h, int w, std::pair<int, int> res,
                        std::uint64_t seed) {
  const auto [rh, rw] = res;
  if (rh < 1 || rw < 1 || h % rh != 0 || w % rw != 0) {
    throw ConfigError("perlin: resolution " + std::to_string(rh) + "x" +
                      std::to_string(rw) + " does not divide " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  Rng rng(seed);
  const int gh = rh + 1, gw = rw + 1;
  std::vector<double> gx(static_cast<std::size_t>(gh) * gw),
      gy(static_cast<std::size_t>(gh) * gw);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double angle = 6.283185307179586 * rng.uniform();
    gx[i] = std::cos(angle);
    gy[i] = std::sin(angle);
  }
  const int cell_h = h / rh, cell_w = w / rw;
  FloatField out(h, w);
  for (int y = 0; y < h; ++y) {
    const int iy = y / cell_h;
    const double fy = static_cast<double>(y % cell_h) / cell_h;
    const double uy = fade(fy);
    for (int x = 0; x < w; ++x) {
      const int ix = x / cell_w;
      const double fx = static_cast<double>(x % cell_w) / cell_w;
      const double ux = fade(fx);
      auto dot = [&](int cy, int cx, double oy, double ox) {
        const std::size_t g = static_cast<std::size_t>(cy) * gw + cx;
        return gx[g] * ox + gy[g] * oy;
      };
      const double n00 = dot(iy, ix, fy, fx);
      const double n01 = dot(iy, ix + 1, fy, fx - 1);
      const double n10 = dot(iy + 1, ix, fy - 1, fx);
      const double n11 = dot(iy + 1, ix + 1, fy - 1, fx - 1);
      const double top = n00 + ux * (n01 - n00);
      const double bot = n10 + ux * (n11 - n10);
      out.at(y, x) = static_cast<float>(top + uy * (bot - top));
    }
  }
  return out;
}

namespace {

void min_max_normalize(FloatField& f) {
  auto v = f.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const float mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(v.begin(), v.end(), 0.0f);
    return;
  }
  for (float& x : v) x = (x - mn) / (mx - mn);
}

FloatField rotate90(const FloatField& f, int quarter_turns) {
  FloatField cur = f;
  for (int q = 0; q < quarter_turns; ++q) {
    FloatField next(cur.width(), cur.height());
    for (int y = 0; y < cur.height(); ++y) {
      for (int x = 0; x < cur.width(); ++x) {
        next.at(x, cur.height() - 1 - y) = cur.at(y, x);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

FloatField fractal_perlin(int h, int w, std::pair<int, int> base_res,
                          int octaves, double persistence,
                          std::uint64_t seed) {
  if (octaves < 1) throw ConfigError("perlin: octaves must be >= 1");
  FloatField acc(h, w);
  double amplitude = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const int rh = base_res.first << o, rw = base_res.second << o;
    if (rh > h || rw > w) {
      throw ConfigError("perlin: octave " + std::to_string(o) +
                        " resolution exceeds image size");
    }
    const FloatField n = perlin_noise(h, w, {rh, rw}, seed + o);
    auto a = acc.values();
    auto b = n.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] += static_cast<float>(amplitude * b[k]);
    }
    amplitude *= persistence;
  }
  min_max_normalize(acc);
  return acc;
}

FloatField fractal_perlin(int h, int w, const PerlinConfig& cfg, Rng& rng) {
  cfg.validate();
  const int span = cfg.max_scale_exp - cfg.min_scale_exp + 1;
  const int ey = cfg.min_scale_exp + static_cast<int>(rng.below(span));
  const int ex = cfg.min_scale_exp + static_cast<int>(rng.below(span));
  const std::uint64_t seed = rng.next_u64();
  FloatField f = fractal_perlin(h, w, {1 << ey, 1 << ex}, cfg.octaves,
                                cfg.persistence, seed);
  if (cfg.rotation) {
    const int turns = static_cast<int>(rng.below(4));
    // Odd turns would transpose a non-square field.
    f = rotate90(f, h == w ? turns : (turns & 2));
  }
  return f;
}

Mask make_mask(const FloatField& field, double threshold) {
  Mask m(field.height(), field.width());
  for (std::size_t k = 0; k < m.size(); ++k) {
    m.values()[k] = field.values()[k] > threshold ? 1 : 0;
  }
  return m;
}

Mask sample_mask(int h, int w, const PerlinConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Mask m = make_mask(fractal_perlin(h, w, cfg, rng), cfg.threshold);
    const auto on = std::count(m.values().begin(), m.values().end(), 1);
    if (on > 0 && on <= cfg.max_coverage * static_cast<double>(m.size())) {
      return m;
    }
  }
  throw ConfigError("perlin: no valid mask within max_attempts");
}

SyntheticSample synthesize_anomaly(const Image& x, const Image& texture,
                                   const Mask& mask, double beta) {
  if (x.shape() != texture.shape() || mask.height() != x.height() ||
      mask.width() != x.width()) {
    throw ShapeError("synthesize_anomaly: image, texture and mask sizes differ");
  }
  SyntheticSample s{x, mask};
  const std::size_t hw = mask.size();
  const float b = static_cast<float>(beta);
  for (int c = 0; c < x.channels(); ++c) {
    auto out = s.image.plane(c);
    auto src = x.plane(c);
    auto tex = texture.plane(c);
    for (std::size_t k = 0; k < hw; ++k) {
      if (!mask.values()[k]) continue;
      const float v = b * tex[k] + (1.0f - b) * src[k];
      out[k] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return s;
}

Image self_augment(const Image& x, Rng& rng, int grid) {
  Image out(x.shape());
  // Per-channel affine color jitter plus a random channel permutation.
  std::array<int, 3> perm{0, 1, 2};
  for (int i = 2; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(i + 1)]);
  }
  for (int c = 0; c < x.channels(); ++c) {
    const int src_c = perm[c % 3] % x.channels();
    const float gain = static_cast<float>(rng.uniform(0.5, 1.5));
    const float bias = static_cast<float>(rng.uniform(-0.3, 0.3));
    auto s = x.plane(src_c);
    auto d = out.plane(c);
    for (std::size_t k = 0; k < s.size(); ++k) {
      d[k] = std::clamp(gain * (s[k] - 0.5f) + 0.5f + bias, 0.0f, 1.0f);
    }
  }
  // Shuffle equally sized patches; only whole patches move.
  if (grid <= 1 || x.height() % grid != 0 || x.width() % grid != 0) {
    return out;
  }
  const int ph = x.height() / grid, pw = x.width() / grid;
  std::vector<int> order(grid * grid);
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  Image shuffled(x.shape());
  for (int dst = 0; dst < grid * grid; ++dst) {
    const int src = order[dst];
    const int sy = (src / grid) * ph, sx = (src % grid) * pw;
    const int dy = (dst / grid) * ph, dx = (dst % grid) * pw;
    for (int c = 0; c < x.channels(); ++c) {
      for (int y = 0; y < ph; ++y) {
        for (int xx = 0; xx < pw; ++xx) {
          shuffled.at(c, dy + y, dx + xx) = out.at(c, sy + y, sx + xx);
        }
      }
    }
  }
  return shuffled;
}

Image sample_texture(const TextureSource& source, const Image& x, Rng& rng) {
  if (!source.use_bank) return self_augment(x, rng, source.shuffle_grid);
  if (source.bank.empty()) throw ConfigError("texture bank is empty");
  const Image& t = source.bank[rng.below(source.bank.size())];
  if (t.shape() == x.shape()) return t;
  if (t.channels() != x.channels()) {
    throw ShapeError("texture channel count differs from image");
  }
  return resize_bilinear(t, x.height(), x.width());
}

SyntheticSample synthesize(const Image& x, const PerlinConfig& cfg,
                           const TextureSource& textures, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Mask mask = sample_mask(x.height(), x.width(), cfg, rng);
  const Image texture = sample_texture(textures, x, rng);
  const double beta = rng.uniform(cfg.beta_min, cfg.beta_max);
  return synthesize_anomaly(x, texture, mask, beta);
}

}  // namespace adapts
