// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/ops.hpp"

#include <algorithm>
#include <cmath>

namespace adapts {

std::string to_string(const Shape3& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

namespace {

// Valid output-column range [lo, hi] for kernel column kx.
inline void valid_range(int k, int stride, int in_dim, int out_dim, int& lo,
                        int& hi) {
  lo = (k == 0) ? 1 : 0;
  hi = std::min(out_dim - 1, (in_dim - k) / stride);
}

}  // namespace

template <typename T>
Tensor<T> conv3x3_forward(const Conv3x3& conv, const Tensor<T>& input) {
  if (input.channels() != conv.in_channels) {
    throw ShapeError("conv3x3: expected " + std::to_string(conv.in_channels) +
                     " input channels, got " +
                     std::to_string(input.channels()));
  }
  const int s = conv.stride;
  const int ih = input.height(), iw = input.width();
  const int oh = conv_out_dim(ih, s), ow = conv_out_dim(iw, s);
  Tensor<T> out(conv.out_channels, oh, ow);
  for (int oc = 0; oc < conv.out_channels; ++oc) {
    auto out_plane = out.plane(oc);
    std::fill(out_plane.begin(), out_plane.end(),
              static_cast<T>(conv.bias[oc]));
    for (int ic = 0; ic < conv.in_channels; ++ic) {
      const T* in_plane = input.plane(ic).data();
      const float* w = &conv.weight[(static_cast<std::size_t>(oc) *
                                         conv.in_channels + ic) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ky, s, ih, oh, oy_lo, oy_hi);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = static_cast<T>(w[ky * 3 + kx]);
          int ox_lo, ox_hi;
          valid_range(kx, s, iw, ow, ox_lo, ox_hi);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const T* in_row = in_plane + (oy * s + ky - 1) * iw + (kx - 1);
            T* out_row = out_plane.data() + oy * ow;
            if (s == 1) {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                out_row[ox] += wv * in_row[ox];
              }
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                out_row[ox] += wv * in_row[ox * s];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv3x3_backward_input(const Conv3x3& conv, const Tensor<T>& grad_out,
                                 const Shape3& input_shape) {
  const int s = conv.stride;
  const int ih = input_shape.h, iw = input_shape.w;
  const int oh = grad_out.height(), ow = grad_out.width();
  if (grad_out.channels() != conv.out_channels ||
      oh != conv_out_dim(ih, s) || ow != conv_out_dim(iw, s) ||
      input_shape.c != conv.in_channels) {
    throw ShapeError("conv3x3 backward: shape mismatch");
  }
  Tensor<T> grad_in(input_shape);
  for (int oc = 0; oc < conv.out_channels; ++oc) {
    const T* g_plane = grad_out.plane(oc).data();
    for (int ic = 0; ic < conv.in_channels; ++ic) {
      T* gi_plane = grad_in.plane(ic).data();
      const float* w = &conv.weight[(static_cast<std::size_t>(oc) *
                                         conv.in_channels + ic) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        int oy_lo, oy_hi;
        valid_range(ky, s, ih, oh, oy_lo, oy_hi);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = static_cast<T>(w[ky * 3 + kx]);
          int ox_lo, ox_hi;
          valid_range(kx, s, iw, ow, ox_lo, ox_hi);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            T* gi_row = gi_plane + (oy * s + ky - 1) * iw + (kx - 1);
            const T* g_row = g_plane + oy * ow;
            if (s == 1) {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                gi_row[ox] += wv * g_row[ox];
              }
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                gi_row[ox * s] += wv * g_row[ox];
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

namespace {

struct Taps1d {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

Taps1d bilinear_taps(int in, int out) {
  Taps1d t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = src - i0;
  }
  return t;
}

}  // namespace

template <typename T>
void resize_bilinear_plane(const T* in, int ih, int iw, T* out, int oh,
                           int ow) {
  if (ih == oh && iw == ow) {
    std::copy(in, in + static_cast<std::size_t>(ih) * iw, out);
    return;
  }
  const Taps1d ty = bilinear_taps(ih, oh);
  const Taps1d tx = bilinear_taps(iw, ow);
  for (int y = 0; y < oh; ++y) {
    const T fy = static_cast<T>(ty.frac[y]);
    const T* r0 = in + static_cast<std::size_t>(ty.i0[y]) * iw;
    const T* r1 = in + static_cast<std::size_t>(ty.i1[y]) * iw;
    for (int x = 0; x < ow; ++x) {
      const T fx = static_cast<T>(tx.frac[x]);
      const int x0 = tx.i0[x], x1 = tx.i1[x];
      const T top = r0[x0] + fx * (r0[x1] - r0[x0]);
      const T bot = r1[x0] + fx * (r1[x1] - r1[x0]);
      out[static_cast<std::size_t>(y) * ow + x] = top + fy * (bot - top);
    }
  }
}

template <typename T>
void resize_bilinear_plane_adjoint(const T* grad_out, int oh, int ow,
                                   T* grad_in, int ih, int iw) {
  if (ih == oh && iw == ow) {
    const std::size_t n = static_cast<std::size_t>(ih) * iw;
    for (std::size_t i = 0; i < n; ++i) grad_in[i] += grad_out[i];
    return;
  }
  const Taps1d ty = bilinear_taps(ih, oh);
  const Taps1d tx = bilinear_taps(iw, ow);
  for (int y = 0; y < oh; ++y) {
    const T fy = static_cast<T>(ty.frac[y]);
    T* r0 = grad_in + static_cast<std::size_t>(ty.i0[y]) * iw;
    T* r1 = grad_in + static_cast<std::size_t>(ty.i1[y]) * iw;
    for (int x = 0; x < ow; ++x) {
      const T fx = static_cast<T>(tx.frac[x]);
      const int x0 = tx.i0[x], x1 = tx.i1[x];
      const T g = grad_out[static_cast<std::size_t>(y) * ow + x];
      const T g_top = g * (T(1) - fy);
      const T g_bot = g * fy;
      r0[x0] += g_top * (T(1) - fx);
      r0[x1] += g_top * fx;
      r1[x0] += g_bot * (T(1) - fx);
      r1[x1] += g_bot * fx;
    }
  }
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& in, int oh, int ow) {
  Tensor<T> out(in.channels(), oh, ow);
  for (int c = 0; c < in.channels(); ++c) {
    resize_bilinear_plane(in.plane(c).data(), in.height(), in.width(),
                          out.plane(c).data(), oh, ow);
  }
  return out;
}

template <typename T>
Field<T> resize_bilinear(const Field<T>& in, int oh, int ow) {
  Field<T> out(oh, ow);
  resize_bilinear_plane(in.data(), in.height(), in.width(), out.data(), oh,
                        ow);
  return out;
}

namespace {

// Overlap weights of output cell o with input cells for box resampling.
std::vector<std::vector<std::pair<int, double>>> area_weights(int in, int out) {
  std::vector<std::vector<std::pair<int, double>>> w(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double a = o * scale, b = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(a));
         i < std::min(in, static_cast<int>(std::ceil(b))); ++i) {
      const double overlap = std::min(b, i + 1.0) - std::max(a, double(i));
      if (overlap > 0) w[o].emplace_back(i, overlap / scale);
    }
  }
  return w;
}

void resize_area_plane(const float* in, int ih, int iw, float* out, int oh,
                       int ow) {
  const auto wy = area_weights(ih, oh);
  const auto wx = area_weights(iw, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (auto [iy, fy] : wy[y]) {
        for (auto [ix, fx] : wx[x]) {
          acc += fy * fx * in[static_cast<std::size_t>(iy) * iw + ix];
        }
      }
      out[static_cast<std::size_t>(y) * ow + x] = static_cast<float>(acc);
    }
  }
}

}  // namespace

Field<float> resize_area(const Field<float>& in, int oh, int ow) {
  Field<float> out(oh, ow);
  resize_area_plane(in.data(), in.height(), in.width(), out.data(), oh, ow);
  return out;
}

Tensor<float> resize_area(const Tensor<float>& in, int oh, int ow) {
  Tensor<float> out(in.channels(), oh, ow);
  for (int c = 0; c < in.channels(); ++c) {
    resize_area_plane(in.plane(c).data(), in.height(), in.width(),
                      out.plane(c).data(), oh, ow);
  }
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Field<float> gaussian_smooth(const Field<float>& in, double sigma) {
  if (sigma <= 0) return in;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = in.height(), w = in.width();
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * in.at(y, reflect_index(x + k, w));
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  Field<float> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] *
               tmp[static_cast<std::size_t>(reflect_index(y + k, h)) * w + x];
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

#define ADAPTS_INSTANTIATE_OPS(T)                                             \
  template Tensor<T> conv3x3_forward<T>(const Conv3x3&, const Tensor<T>&);   \
  template Tensor<T> conv3x3_backward_input<T>(const Conv3x3&,               \
                                               const Tensor<T>&,             \
                                               const Shape3&);               \
  template void resize_bilinear_plane<T>(const T*, int, int, T*, int, int);  \
  template void resize_bilinear_plane_adjoint<T>(const T*, int, int, T*,     \
                                                 int, int);                  \
  template Tensor<T> resize_bilinear<T>(const Tensor<T>&, int, int);         \
  template Field<T> resize_bilinear<T>(const Field<T>&, int, int);

ADAPTS_INSTANTIATE_OPS(float)
ADAPTS_INSTANTIATE_OPS(double)

#undef ADAPTS_INSTANTIATE_OPS

}  // namespace adapts
