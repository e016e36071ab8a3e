// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "adapts/errors.hpp"
#include "adapts/rng.hpp"

namespace adapts {

AdapterKind AdapterKind::bottleneck(double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw ConfigError("bottleneck reduction factor must be in (0,1)");
  }
  return {AdapterVariant::kBottleneck, r};
}

AdapterKind AdapterKind::expansion(double e) {
  if (!(e > 1.0) || std::floor(e) != e) {
    throw ConfigError("expansion factor must be an integer > 1");
  }
  return {AdapterVariant::kExpansion, e};
}

std::string AdapterKind::name() const {
  switch (variant) {
    case AdapterVariant::kLinear:
      return "linear";
    case AdapterVariant::kBottleneck:
      if (factor == 0.25) return "bn25";
      if (factor == 0.5) return "bn50";
      return "bottleneck:" + std::to_string(factor);
    case AdapterVariant::kExpansion:
      if (factor == 2.0) return "exp2";
      return "expansion:" + std::to_string(static_cast<int>(factor));
  }
  return "linear";
}

AdapterKind AdapterKind::parse(const std::string& name) {
  if (name == "linear") return linear();
  if (name == "bn25") return bottleneck(0.25);
  if (name == "bn50") return bottleneck(0.5);
  if (name == "exp2" || name == "expansion") return expansion(2.0);
  auto colon = name.find(':');
  if (colon != std::string::npos) {
    const std::string head = name.substr(0, colon);
    double v = 0;
    try {
      v = std::stod(name.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad adapter factor in '" + name + "'");
    }
    if (head == "bottleneck") return bottleneck(v);
    if (head == "expansion") return expansion(v);
  }
  throw ConfigError("unknown adapter kind '" + name + "'");
}

int latent_dim(const AdapterKind& kind, int channels) {
  switch (kind.variant) {
    case AdapterVariant::kLinear:
      return channels;
    case AdapterVariant::kBottleneck:
      return std::max(1, static_cast<int>(std::floor(channels * kind.factor)));
    case AdapterVariant::kExpansion:
      return channels * static_cast<int>(kind.factor);
  }
  return channels;
}

std::string precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "int8";
}

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "int8") return Precision::kInt8;
  throw ConfigError("unknown precision '" + s + "'");
}

template <typename T>
std::size_t AdapterParamsT<T>::stored_param_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + bn_gamma.size() +
         bn_beta.size() + bn_mean.size() + bn_var.size();
}

template <typename T>
template <typename U>
AdapterParamsT<U> AdapterParamsT<T>::cast() const {
  auto conv = [](const std::vector<T>& v) {
    return std::vector<U>(v.begin(), v.end());
  };
  AdapterParamsT<U> out;
  out.channels = channels;
  out.latent = latent;
  out.w1 = conv(w1);
  out.b1 = conv(b1);
  out.w2 = conv(w2);
  out.b2 = conv(b2);
  out.bn_gamma = conv(bn_gamma);
  out.bn_beta = conv(bn_beta);
  out.bn_mean = conv(bn_mean);
  out.bn_var = conv(bn_var);
  out.eps = static_cast<U>(eps);
  out.momentum = static_cast<U>(momentum);
  return out;
}

template <typename T>
AdapterGrads<T>::AdapterGrads(const AdapterParamsT<T>& p)
    : w1(p.w1.size()),
      b1(p.b1.size()),
      w2(p.w2.size()),
      b2(p.b2.size()),
      bn_gamma(p.bn_gamma.size()),
      bn_beta(p.bn_beta.size()) {}

template <typename T>
void AdapterGrads<T>::zero() {
  for (auto* v : {&w1, &b1, &w2, &b2, &bn_gamma, &bn_beta}) {
    std::fill(v->begin(), v->end(), T(0));
  }
}

std::set<int> AdapterSet::layers() const {
  std::set<int> out;
  for (const auto& [l, p] : per_layer) out.insert(l);
  return out;
}

AdapterParams init_adapter(const AdapterKind& kind, int channels,
                           std::uint64_t seed) {
  if (channels < 1) throw ConfigError("adapter channels must be >= 1");
  AdapterParams p;
  p.channels = channels;
  p.latent = latent_dim(kind, channels);
  const auto c = static_cast<std::size_t>(channels);
  const auto l = static_cast<std::size_t>(p.latent);
  Rng rng(seed);
  p.w1.resize(l * c);
  p.w2.resize(c * l);
  const double std1 = std::sqrt(2.0 / channels);
  const double std2 = std::sqrt(2.0 / p.latent);
  for (float& w : p.w1) w = static_cast<float>(rng.normal() * std1);
  for (float& w : p.w2) w = static_cast<float>(rng.normal() * std2);
  p.b1.assign(l, 0.0f);
  p.b2.assign(c, 0.0f);
  p.bn_gamma.assign(l, 1.0f);
  p.bn_beta.assign(l, 0.0f);
  p.bn_mean.assign(l, 0.0f);
  p.bn_var.assign(l, 1.0f);
  return p;
}

AdapterSet init_adapter_set(const AdapterKind& kind,
                            const std::map<int, int>& layer_channels,
                            std::uint64_t seed) {
  AdapterSet set;
  set.kind = kind;
  for (const auto& [layer, channels] : layer_channels) {
    set.per_layer[layer] =
        init_adapter(kind, channels, derive_seed(seed, std::uint64_t(layer)));
  }
  return set;
}

namespace {

template <typename T>
void check_channels(const AdapterParamsT<T>& p, const Tensor<T>& x) {
  if (x.channels() != p.channels) {
    throw ShapeError("adapter expects " + std::to_string(p.channels) +
                     " channels, got " + std::to_string(x.channels()));
  }
}

// z = W1 x + b1 for one item.
template <typename T>
Tensor<T> first_projection(const AdapterParamsT<T>& p, const Tensor<T>& x) {
  Tensor<T> z(p.latent, x.height(), x.width());
  const std::size_t hw = static_cast<std::size_t>(x.height()) * x.width();
  for (int l = 0; l < p.latent; ++l) {
    T* zr = z.plane(l).data();
    std::fill(zr, zr + hw, p.b1[l]);
    const T* w = &p.w1[static_cast<std::size_t>(l) * p.channels];
    for (int c = 0; c < p.channels; ++c) {
      const T wv = w[c];
      const T* xr = x.plane(c).data();
      for (std::size_t i = 0; i < hw; ++i) zr[i] += wv * xr[i];
    }
  }
  return z;
}

}  // namespace

template <typename T>
std::vector<Tensor<T>> adapter_forward_batch(AdapterParamsT<T>& p,
                                             const std::vector<Tensor<T>>& x,
                                             BnMode mode,
                                             AdapterTrace<T>* trace) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  for (const auto& t : x) {
    check_channels(p, t);
    if (t.shape() != x.front().shape()) {
      throw ShapeError("adapter batch items differ in shape");
    }
  }
  const std::size_t hw =
      static_cast<std::size_t>(x.front().height()) * x.front().width();
  std::vector<Tensor<T>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = first_projection(p, x[i]);

  std::vector<T> mean(p.latent), inv_std(p.latent);
  if (mode == BnMode::kTrain) {
    const double m = static_cast<double>(n * hw);
    for (int l = 0; l < p.latent; ++l) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (T v : z[i].plane(l)) s += v;
      }
      const double mu = s / m;
      double ss = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (T v : z[i].plane(l)) ss += (v - mu) * (v - mu);
      }
      const double var = ss / m;
      mean[l] = static_cast<T>(mu);
      inv_std[l] = static_cast<T>(1.0 / std::sqrt(var + double(p.eps)));
      const double unbiased = m > 1 ? ss / (m - 1) : var;
      p.bn_mean[l] = static_cast<T>((1 - double(p.momentum)) * p.bn_mean[l] +
                                    double(p.momentum) * mu);
      p.bn_var[l] = static_cast<T>((1 - double(p.momentum)) * p.bn_var[l] +
                                   double(p.momentum) * unbiased);
    }
  } else {
    for (int l = 0; l < p.latent; ++l) {
      mean[l] = p.bn_mean[l];
      inv_std[l] = T(1) / std::sqrt(p.bn_var[l] + p.eps);
    }
  }

  std::vector<Tensor<T>> y(n);
  if (trace) {
    trace->mode = mode;
    trace->input = x;
    trace->normalized.assign(n, Tensor<T>());
    trace->bn_out.assign(n, Tensor<T>());
    trace->inv_std = inv_std;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T>& zi = z[i];
    Tensor<T> bn_out(zi.shape());
    for (int l = 0; l < p.latent; ++l) {
      T* zr = zi.plane(l).data();
      T* br = bn_out.plane(l).data();
      const T mu = mean[l], is = inv_std[l], g = p.bn_gamma[l],
              b = p.bn_beta[l];
      for (std::size_t k = 0; k < hw; ++k) {
        zr[k] = (zr[k] - mu) * is;  // normalized
        br[k] = g * zr[k] + b;
      }
    }
    Tensor<T> out = x[i];
    for (int c = 0; c < p.channels; ++c) {
      T* yr = out.plane(c).data();
      const T bias = p.b2[c];
      for (std::size_t k = 0; k < hw; ++k) yr[k] += bias;
      const T* w = &p.w2[static_cast<std::size_t>(c) * p.latent];
      for (int l = 0; l < p.latent; ++l) {
        const T wv = w[l];
        if (wv == T(0)) continue;
        const T* br = bn_out.plane(l).data();
        for (std::size_t k = 0; k < hw; ++k) {
          yr[k] += wv * std::max(br[k], T(0));
        }
      }
    }
    y[i] = std::move(out);
    if (trace) {
      trace->normalized[i] = std::move(zi);
      trace->bn_out[i] = std::move(bn_out);
    }
  }
  return y;
}

template <typename T>
Tensor<T> adapter_forward(const AdapterParamsT<T>& p, const Tensor<T>& x) {
  AdapterParamsT<T> copy = p;
  return std::move(adapter_forward_batch(copy, {x}, BnMode::kEval).front());
}

Tensor<float> adapter_forward(AdapterParams& p, const Tensor<float>& x,
                              BnMode mode) {
  return std::move(adapter_forward_batch(p, {x}, mode).front());
}

template <typename T>
std::vector<Tensor<T>> adapter_backward_batch(
    const AdapterParamsT<T>& p, const AdapterTrace<T>& trace,
    const std::vector<Tensor<T>>& grad_out, AdapterGrads<T>& grads) {
  const std::size_t n = grad_out.size();
  if (n != trace.input.size()) {
    throw ShapeError("adapter backward: batch size mismatch");
  }
  if (n == 0) return {};
  const std::size_t hw = static_cast<std::size_t>(grad_out.front().height()) *
                         grad_out.front().width();
  const int C = p.channels, L = p.latent;

  // Gradient w.r.t. the BN output, per item (latent x H x W).
  std::vector<Tensor<T>> d_xhat(n);
  std::vector<double> sum_d(L, 0.0), sum_d_xhat(L, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor<T>& dy = grad_out[i];
    const Tensor<T>& bn_out = trace.bn_out[i];
    const Tensor<T>& xhat = trace.normalized[i];
    for (int c = 0; c < C; ++c) {
      double s = 0;
      for (T v : dy.plane(c)) s += v;
      grads.b2[c] += static_cast<T>(s);
    }
    Tensor<T> d_bn(L, dy.height(), dy.width());
    for (int l = 0; l < L; ++l) {
      T* dr = d_bn.plane(l).data();
      const T* br = bn_out.plane(l).data();
      for (int c = 0; c < C; ++c) {
        const T* dyr = dy.plane(c).data();
        const T wv = p.w2[static_cast<std::size_t>(c) * L + l];
        double gw = 0;
        for (std::size_t k = 0; k < hw; ++k) {
          const T a = std::max(br[k], T(0));
          gw += double(dyr[k]) * a;
          dr[k] += wv * dyr[k];
        }
        grads.w2[static_cast<std::size_t>(c) * L + l] += static_cast<T>(gw);
      }
      const T* xr = xhat.plane(l).data();
      double gg = 0, gb = 0, sd = 0, sdx = 0;
      for (std::size_t k = 0; k < hw; ++k) {
        if (!(br[k] > T(0))) dr[k] = T(0);
        gg += double(dr[k]) * xr[k];
        gb += dr[k];
        const double dx = double(dr[k]) * p.bn_gamma[l];
        sd += dx;
        sdx += dx * xr[k];
        dr[k] = static_cast<T>(dx);
      }
      grads.bn_gamma[l] += static_cast<T>(gg);
      grads.bn_beta[l] += static_cast<T>(gb);
      sum_d[l] += sd;
      sum_d_xhat[l] += sdx;
    }
    d_xhat[i] = std::move(d_bn);
  }

  std::vector<Tensor<T>> grad_in(n);
  const double m = static_cast<double>(n * hw);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T>& dz = d_xhat[i];
    const Tensor<T>& xhat = trace.normalized[i];
    for (int l = 0; l < L; ++l) {
      T* dr = dz.plane(l).data();
      const T* xr = xhat.plane(l).data();
      const double is = trace.inv_std[l];
      if (trace.mode == BnMode::kTrain) {
        const double a = sum_d[l] / m, b = sum_d_xhat[l] / m;
        for (std::size_t k = 0; k < hw; ++k) {
          dr[k] = static_cast<T>(is * (dr[k] - a - xr[k] * b));
        }
      } else {
        for (std::size_t k = 0; k < hw; ++k) {
          dr[k] = static_cast<T>(is * dr[k]);
        }
      }
    }
    const Tensor<T>& x = trace.input[i];
    Tensor<T> dx = grad_out[i];
    for (int l = 0; l < L; ++l) {
      const T* dr = dz.plane(l).data();
      double s = 0;
      for (std::size_t k = 0; k < hw; ++k) s += dr[k];
      grads.b1[l] += static_cast<T>(s);
      for (int c = 0; c < C; ++c) {
        const T* xr = x.plane(c).data();
        T* dxr = dx.plane(c).data();
        const T wv = p.w1[static_cast<std::size_t>(l) * C + c];
        double gw = 0;
        for (std::size_t k = 0; k < hw; ++k) {
          gw += double(dr[k]) * xr[k];
          dxr[k] += wv * dr[k];
        }
        grads.w1[static_cast<std::size_t>(l) * C + c] += static_cast<T>(gw);
      }
    }
    grad_in[i] = std::move(dx);
  }
  return grad_in;
}

std::uint64_t stored_param_count(const AdapterKind& kind, int channels) {
  const std::uint64_t c = channels;
  const std::uint64_t l = latent_dim(kind, channels);
  return 2 * c * l + l + c + 4 * l;
}

std::uint64_t bias_param_count(const AdapterKind& kind, int channels) {
  return static_cast<std::uint64_t>(latent_dim(kind, channels)) + channels;
}

std::uint64_t adapter_memory_bytes(const AdapterKind& kind, int channels,
                                   Precision precision) {
  const std::uint64_t total = stored_param_count(kind, channels);
  if (precision == Precision::kF32) return total * 4;
  const std::uint64_t bias = bias_param_count(kind, channels);
  return (total - bias) + bias * 4;
}

std::uint64_t adapter_memory_bytes(const AdapterKind& kind,
                                   const std::vector<int>& channels,
                                   Precision precision) {
  std::uint64_t bytes = 0;
  for (int c : channels) bytes += adapter_memory_bytes(kind, c, precision);
  return bytes;
}

std::uint64_t adapter_param_count(const AdapterSet& set) {
  std::uint64_t n = 0;
  for (const auto& [layer, p] : set.per_layer) n += p.stored_param_count();
  return n;
}

std::uint64_t adapter_memory_bytes(const AdapterSet& set) {
  std::uint64_t bytes = 0;
  for (const auto& [layer, p] : set.per_layer) {
    bytes += adapter_memory_bytes(set.kind, p.channels, set.precision);
  }
  return bytes;
}

std::string format_mib(std::uint64_t bytes) {
  const std::uint64_t hundredths = bytes * 100 / 1048576;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu.%02llu",
                static_cast<unsigned long long>(hundredths / 100),
                static_cast<unsigned long long>(hundredths % 100));
  return buf;
}

template struct AdapterParamsT<float>;
template struct AdapterParamsT<double>;
template AdapterParamsT<double> AdapterParamsT<float>::cast<double>() const;
template AdapterParamsT<float> AdapterParamsT<double>::cast<float>() const;
template AdapterParamsT<float> AdapterParamsT<float>::cast<float>() const;
template struct AdapterGrads<float>;
template struct AdapterGrads<double>;

#define ADAPTS_INSTANTIATE_ADAPTER(T)                                        \
  template std::vector<Tensor<T>> adapter_forward_batch<T>(                 \
      AdapterParamsT<T>&, const std::vector<Tensor<T>>&, BnMode,            \
      AdapterTrace<T>*);                                                     \
  template Tensor<T> adapter_forward<T>(const AdapterParamsT<T>&,           \
                                        const Tensor<T>&);                  \
  template std::vector<Tensor<T>> adapter_backward_batch<T>(                \
      const AdapterParamsT<T>&, const AdapterTrace<T>&,                     \
      const std::vector<Tensor<T>>&, AdapterGrads<T>&);

ADAPTS_INSTANTIATE_ADAPTER(float)
ADAPTS_INSTANTIATE_ADAPTER(double)

#undef ADAPTS_INSTANTIATE_ADAPTER

}  // namespace adapts
