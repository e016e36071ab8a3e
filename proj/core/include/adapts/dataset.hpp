// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// MVTec-style dataset layout:
//
//   <root>/<category>/train/good/*.png
//   <root>/<category>/test/<defect>/*.png      ("good" = normal)
//   <root>/<category>/ground_truth/<defect>/<stem>_mask.png
//
// plus a procedural toy dataset generator with the same layout.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adapts/tensor.hpp"

namespace adapts {

struct TestEntry {
  std::filesystem::path image;
  std::string defect_type;  // "good" for normal images
  std::optional<std::filesystem::path> mask;

  bool anomalous() const { return defect_type != "good"; }
};

struct CategoryLayout {
  std::string name;
  std::vector<std::filesystem::path> train;
  std::vector<TestEntry> test;
};

struct DatasetLayout {
  std::filesystem::path root;
  std::vector<CategoryLayout> categories;  // sorted by name

  const CategoryLayout& category(const std::string& name) const;
};

// Validates the layout: every anomalous image needs a same-size mask and
// every category a non-empty train split. Files are ordered
// lexicographically. Throws DatasetError naming the offending file.
DatasetLayout scan_dataset(const std::filesystem::path& root);

// Images resized to the network input; masks resampled to match.
struct CategoryData {
  std::string name;
  std::vector<Image> train;
  std::vector<Image> test;
  std::vector<std::uint8_t> test_labels;
  std::vector<Mask> test_masks;
};

CategoryData load_category(const CategoryLayout& layout, int height, int width);

struct ToyDatasetOptions {
  int categories = 3;
  int train_per_category = 40;
  int test_per_class = 10;  // normal and anomalous test images each
  int image_size = 64;
  std::uint64_t seed = 0;
};

// Categories differ in stripe frequency, orientation and palette. Test
// anomalies are Perlin-shaped regions blended with a foreign pattern.
// Deterministic in the options; throws IoError on unwritable paths.
DatasetLayout make_toy_dataset(const std::filesystem::path& out_dir,
                               const ToyDatasetOptions& options);

}  // namespace adapts
