// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/seg_guidance.hpp"

#include <algorithm>
#include <cmath>

#include "adapts/errors.hpp"
#include "adapts/matching.hpp"
#include "adapts/ops.hpp"
#include "adapts/rng.hpp"

namespace adapts {

SegHead init_seg_head(int channels, std::uint64_t seed) {
  SegHead head;
  head.w.resize(channels);
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(channels));
  for (float& w : head.w) w = static_cast<float>(rng.normal() * s);
  head.b = -2.0f;
  return head;
}

template <typename T>
Field<T> seg_forward(const SegHeadT<T>& head, const Tensor<T>& d) {
  if (static_cast<int>(head.w.size()) != d.channels()) {
    throw ShapeError("segmentation head expects " +
                     std::to_string(head.w.size()) + " channels, got " +
                     std::to_string(d.channels()));
  }
  Field<T> logit(d.height(), d.width(), head.b);
  T* o = logit.data();
  for (int c = 0; c < d.channels(); ++c) {
    const T wv = head.w[c];
    const T* p = d.plane(c).data();
    for (std::size_t k = 0; k < logit.size(); ++k) o[k] += wv * p[k];
  }
  for (T& v : logit.values()) v = T(1) / (T(1) + std::exp(-v));
  return logit;
}

Mask downsample_mask(const Mask& mask, int out_h, int out_w) {
  if (out_h > mask.height() || out_w > mask.width()) {
    throw ConfigError("downsample_mask: target larger than source");
  }
  FloatField f(mask.height(), mask.width());
  for (std::size_t k = 0; k < f.size(); ++k) {
    f.values()[k] = mask.values()[k] ? 1.0f : 0.0f;
  }
  const FloatField pooled = resize_area(f, out_h, out_w);
  Mask out(out_h, out_w);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.values()[k] = pooled.values()[k] > 0.5f ? 1 : 0;
  }
  return out;
}

namespace {

template <typename T>
void check_same(const Field<T>& pred, const Mask& mask) {
  if (pred.height() != mask.height() || pred.width() != mask.width()) {
    throw ShapeError("prediction and mask sizes differ");
  }
}

inline double clamp_prob(double y) {
  return std::clamp(y, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

template <typename T>
double focal_loss(const Field<T>& pred, const Mask& mask, double gamma) {
  check_same(pred, mask);
  double acc = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double y = clamp_prob(pred.values()[k]);
    const double p = mask.values()[k] ? y : 1.0 - y;
    acc += std::pow(1.0 - p, gamma) * std::log(p);
  }
  return -acc / static_cast<double>(pred.size());
}

template <typename T>
double l1_loss(const Field<T>& pred, const Mask& mask) {
  check_same(pred, mask);
  double acc = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    acc += std::abs((mask.values()[k] ? 1.0 : 0.0) - double(pred.values()[k]));
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
Field<T> focal_loss_grad(const Field<T>& pred, const Mask& mask, double gamma) {
  check_same(pred, mask);
  Field<T> g(pred.height(), pred.width());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double raw = pred.values()[k];
    if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
    const bool pos = mask.values()[k] != 0;
    const double p = pos ? raw : 1.0 - raw;
    const double q = 1.0 - p;
    const double d_p =
        -(-gamma * std::pow(q, gamma - 1.0) * std::log(p) +
          std::pow(q, gamma) / p) * inv_n;
    g.values()[k] = static_cast<T>(pos ? d_p : -d_p);
  }
  return g;
}

template <typename T>
Field<T> l1_loss_grad(const Field<T>& pred, const Mask& mask) {
  check_same(pred, mask);
  Field<T> g(pred.height(), pred.width());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double diff =
        double(pred.values()[k]) - (mask.values()[k] ? 1.0 : 0.0);
    g.values()[k] = static_cast<T>(diff > 0 ? inv_n : (diff < 0 ? -inv_n : 0));
  }
  return g;
}

template <typename T>
LossBreakdown total_loss(const FeaturePyramid<T>& ft,
                         const FeaturePyramid<T>& fs, const SegHeadT<T>& head,
                         const Mask& mask, double gamma) {
  LossBreakdown out;
  out.stfpm = stfpm_loss(ft, fs);
  const Tensor<T> d = diff_tensor(ft, fs);
  const Field<T> pred = seg_forward(head, d);
  const Mask m = downsample_mask(mask, d.height(), d.width());
  out.focal = focal_loss(pred, m, gamma);
  out.l1 = l1_loss(pred, m);
  out.total = out.stfpm + out.focal + out.l1;
  return out;
}

#define ADAPTS_INSTANTIATE_SEG(T)                                            \
  template Field<T> seg_forward<T>(const SegHeadT<T>&, const Tensor<T>&);    \
  template double focal_loss<T>(const Field<T>&, const Mask&, double);       \
  template double l1_loss<T>(const Field<T>&, const Mask&);                  \
  template Field<T> focal_loss_grad<T>(const Field<T>&, const Mask&, double);\
  template Field<T> l1_loss_grad<T>(const Field<T>&, const Mask&);           \
  template LossBreakdown total_loss<T>(const FeaturePyramid<T>&,             \
                                       const FeaturePyramid<T>&,             \
                                       const SegHeadT<T>&, const Mask&,      \
                                       double);

ADAPTS_INSTANTIATE_SEG(float)
ADAPTS_INSTANTIATE_SEG(double)

#undef ADAPTS_INSTANTIATE_SEG

}  // namespace adapts
