// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adapts/errors.hpp"

namespace adapts {

struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

// Dense C x H x W tensor, channel-major.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape3 shape, T fill = T(0))
      : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(int c, int h, int w, T fill = T(0)) : Tensor(Shape3{c, h, w}, fill) {}

  const Shape3& shape() const { return shape_; }
  int channels() const { return shape_.c; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
  }
  const T& at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::span<T> plane(int c) {
    const std::size_t hw = static_cast<std::size_t>(shape_.h) * shape_.w;
    return std::span<T>(data_).subspan(c * hw, hw);
  }
  std::span<const T> plane(int c) const {
    const std::size_t hw = static_cast<std::size_t>(shape_.h) * shape_.w;
    return std::span<const T>(data_).subspan(c * hw, hw);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

using FloatTensor = Tensor<float>;

// An RGB image is a 3 x H x W float tensor with values in [0,1].
using Image = Tensor<float>;

// A single-channel H x W field (anomaly maps, masks, noise).
template <typename T>
class Field {
 public:
  Field() = default;
  Field(int h, int w, T fill = T(0))
      : h_(h), w_(w), data_(static_cast<std::size_t>(h) * w, fill) {}

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  T& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  const T& at(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * w_ + x];
  }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

using FloatField = Field<float>;
using Mask = Field<std::uint8_t>;

// Stage index (1-based) -> feature tensor.
template <typename T>
using FeaturePyramid = std::map<int, Tensor<T>>;

}  // namespace adapts
