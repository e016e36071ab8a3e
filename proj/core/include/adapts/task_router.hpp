// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Per-task prototypes (mean teacher embeddings) and nearest-prototype task
// identification.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adapts/backbone.hpp"

namespace adapts {

// Streaming arithmetic mean of embeddings, accumulated in double.
class PrototypeAccumulator {
 public:
  explicit PrototypeAccumulator(int dim) : sum_(dim, 0.0) {}
  void add(const std::vector<float>& embedding);
  std::size_t count() const { return count_; }
  // Throws DatasetError when nothing was added.
  std::vector<float> mean() const;

 private:
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

std::vector<float> compute_prototype(const Backbone& backbone,
                                     const std::vector<Image>& images);

struct RouteResult {
  int task = -1;
  std::vector<double> distances;  // Euclidean distance per task id
};

// Append-only store. Task ids are dense from 0 in insertion order.
class PrototypeStore {
 public:
  PrototypeStore() = default;
  explicit PrototypeStore(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(names_.size()); }
  bool empty() const { return names_.empty(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<float>& prototype(int task) const {
    return prototypes_.at(task);
  }
  // Returns -1 when absent.
  int find(const std::string& name) const;

  // Throws ConfigError on dimension mismatch or duplicate name.
  int add_task(const std::vector<float>& prototype, const std::string& name);

  // argmin distance, lowest id on ties. Throws on empty store or mismatch.
  RouteResult identify(const std::vector<float>& embedding) const;

  std::size_t memory_bytes() const {
    return static_cast<std::size_t>(size()) * dim_ * sizeof(float);
  }

  friend bool operator==(const PrototypeStore&,
                         const PrototypeStore&) = default;

 private:
  int dim_ = 0;
  std::vector<std::vector<float>> prototypes_;
  std::vector<std::string> names_;
};

RouteResult identify_task(const PrototypeStore& store, const Image& image,
                          const Backbone& backbone);

// Container layout: tensor "prototypes" (K x D) plus "task_names" metadata.
void save_store(const PrototypeStore& store, const std::filesystem::path& dir);
PrototypeStore load_store(const std::filesystem::path& dir);

}  // namespace adapts
