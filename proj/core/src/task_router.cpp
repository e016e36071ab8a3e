// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/task_router.hpp"

#include <cmath>

#include "adapts/container.hpp"
#include "adapts/errors.hpp"

namespace adapts {

void PrototypeAccumulator::add(const std::vector<float>& embedding) {
  if (embedding.size() != sum_.size()) {
    throw ShapeError("prototype: embedding dim " +
                     std::to_string(embedding.size()) + " != " +
                     std::to_string(sum_.size()));
  }
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += embedding[i];
  ++count_;
}

std::vector<float> PrototypeAccumulator::mean() const {
  if (count_ == 0) throw DatasetError("prototype: empty dataset");
  std::vector<float> out(sum_.size());
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    out[i] = static_cast<float>(sum_[i] / static_cast<double>(count_));
  }
  return out;
}

std::vector<float> compute_prototype(const Backbone& backbone,
                                     const std::vector<Image>& images) {
  PrototypeAccumulator acc(backbone.spec().embed_dim);
  for (const Image& img : images) acc.add(backbone.forward_embedding(img));
  return acc.mean();
}

int PrototypeStore::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[i] == name) return i;
  }
  return -1;
}

int PrototypeStore::add_task(const std::vector<float>& prototype,
                             const std::string& name) {
  if (dim_ <= 0) throw ConfigError("prototype store has no dimension");
  if (static_cast<int>(prototype.size()) != dim_) {
    throw ConfigError("prototype dim " + std::to_string(prototype.size()) +
                      " does not match store dim " + std::to_string(dim_));
  }
  if (find(name) >= 0) throw ConfigError("duplicate task name '" + name + "'");
  prototypes_.push_back(prototype);
  names_.push_back(name);
  return size() - 1;
}

RouteResult PrototypeStore::identify(
    const std::vector<float>& embedding) const {
  if (empty()) throw ConfigError("identify: prototype store is empty");
  if (static_cast<int>(embedding.size()) != dim_) {
    throw ShapeError("identify: embedding dim " +
                     std::to_string(embedding.size()) +
                     " does not match store dim " + std::to_string(dim_));
  }
  RouteResult r;
  r.distances.resize(size());
  for (int t = 0; t < size(); ++t) {
    double d2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double d = static_cast<double>(embedding[i]) - prototypes_[t][i];
      d2 += d * d;
    }
    r.distances[t] = std::sqrt(d2);
    if (r.task < 0 || r.distances[t] < r.distances[r.task]) r.task = t;
  }
  return r;
}

RouteResult identify_task(const PrototypeStore& store, const Image& image,
                          const Backbone& backbone) {
  return store.identify(backbone.forward_embedding(image));
}

void save_store(const PrototypeStore& store, const std::filesystem::path& dir) {
  WeightContainer c;
  c.metadata()["kind"] = "prototype_store";
  c.metadata()["dim"] = store.dim();
  c.metadata()["task_names"] = store.names();
  std::vector<float> flat;
  flat.reserve(static_cast<std::size_t>(store.size()) * store.dim());
  for (int t = 0; t < store.size(); ++t) {
    const auto& p = store.prototype(t);
    flat.insert(flat.end(), p.begin(), p.end());
  }
  c.put_f32("prototypes", {store.size(), store.dim()}, flat);
  c.save(dir);
}

PrototypeStore load_store(const std::filesystem::path& dir) {
  const WeightContainer c = WeightContainer::load(dir);
  try {
    const auto& meta = c.metadata();
    if (meta.at("kind").get<std::string>() != "prototype_store") {
      throw LoadError("not a prototype store: " + dir.string());
    }
    const int dim = meta.at("dim").get<int>();
    const auto names = meta.at("task_names").get<std::vector<std::string>>();
    const int k = static_cast<int>(names.size());
    const auto& flat = c.expect_f32("prototypes", {k, dim});
    PrototypeStore store(dim);
    for (int t = 0; t < k; ++t) {
      store.add_task(std::vector<float>(flat.begin() + std::size_t(t) * dim,
                                        flat.begin() + std::size_t(t + 1) * dim),
                     names[t]);
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed prototype manifest in " + dir.string() + ": " +
                    e.what());
  }
}

}  // namespace adapts
