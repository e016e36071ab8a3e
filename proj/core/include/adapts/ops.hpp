// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Low-level tensor kernels shared by the forward and backward passes.
// Templates are explicitly instantiated for float and double.

#pragma once

#include <vector>

#include "adapts/tensor.hpp"

namespace adapts {

// 3x3 convolution, padding 1, configurable stride. Weights are laid out as
// [out][in][ky][kx].
struct Conv3x3 {
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  std::vector<float> weight;
  std::vector<float> bias;

  std::size_t param_count() const { return weight.size() + bias.size(); }
};

inline int conv_out_dim(int in, int stride) { return (in - 1) / stride + 1; }

template <typename T>
Tensor<T> conv3x3_forward(const Conv3x3& conv, const Tensor<T>& input);

// Gradient of the convolution output with respect to its input.
template <typename T>
Tensor<T> conv3x3_backward_input(const Conv3x3& conv, const Tensor<T>& grad_out,
                                 const Shape3& input_shape);

// Bilinear resampling with half-pixel centers (corner alignment off).
template <typename T>
void resize_bilinear_plane(const T* in, int ih, int iw, T* out, int oh, int ow);

// Adjoint of resize_bilinear_plane: scatters grad_out back onto grad_in
// (accumulating).
template <typename T>
void resize_bilinear_plane_adjoint(const T* grad_out, int oh, int ow,
                                   T* grad_in, int ih, int iw);

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& in, int oh, int ow);

template <typename T>
Field<T> resize_bilinear(const Field<T>& in, int oh, int ow);

// Area-weighted (box) resampling; exact average pooling for integer factors.
Field<float> resize_area(const Field<float>& in, int oh, int ow);
Tensor<float> resize_area(const Tensor<float>& in, int oh, int ow);

// Separable Gaussian blur, kernel truncated at 4 sigma, mirrored borders.
// sigma <= 0 returns the input unchanged.
Field<float> gaussian_smooth(const Field<float>& in, double sigma);

// Mirror index into [0, n) (edge sample repeated: d c b a | a b c d).
int reflect_index(int i, int n);

}  // namespace adapts
