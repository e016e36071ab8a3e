// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "adapts/errors.hpp"
#include "adapts/image_io.hpp"
#include "adapts/ops.hpp"
#include "adapts/rng.hpp"
#include "adapts/seg_guidance.hpp"
#include "adapts/synth_anomaly.hpp"

namespace fs = std::filesystem;

namespace adapts {

const CategoryLayout& DatasetLayout::category(const std::string& name) const {
  for (const auto& c : categories) {
    if (c.name == name) return c;
  }
  throw DatasetError("unknown category '" + name + "'");
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (want_dirs ? e.is_directory()
                  : (e.is_regular_file() && e.path().extension() == ".png")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetLayout scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DatasetError("dataset root '" + root.string() + "' does not exist");
  }
  DatasetLayout layout;
  layout.root = root;
  for (const fs::path& cat_dir : sorted_entries(root, true)) {
    if (!fs::is_directory(cat_dir / "train")) continue;
    CategoryLayout cat;
    cat.name = cat_dir.filename().string();
    cat.train = sorted_entries(cat_dir / "train" / "good", false);
    if (cat.train.empty()) {
      throw DatasetError("category '" + cat.name + "' has an empty train split");
    }
    for (const fs::path& type_dir : sorted_entries(cat_dir / "test", true)) {
      const std::string type = type_dir.filename().string();
      for (const fs::path& img : sorted_entries(type_dir, false)) {
        TestEntry e{img, type, std::nullopt};
        if (e.anomalous()) {
          const fs::path mask = cat_dir / "ground_truth" / type /
                                (img.stem().string() + "_mask.png");
          if (!fs::is_regular_file(mask)) {
            throw DatasetError("missing mask for anomalous image '" +
                               img.string() + "'");
          }
          if (png_size(mask) != png_size(img)) {
            throw DatasetError("mask size differs from image '" +
                               img.string() + "'");
          }
          e.mask = mask;
        }
        cat.test.push_back(std::move(e));
      }
    }
    layout.categories.push_back(std::move(cat));
  }
  if (layout.categories.empty()) {
    throw DatasetError("no categories found under '" + root.string() + "'");
  }
  return layout;
}

namespace {

Mask fit_mask(const Mask& m, int height, int width) {
  if (m.height() == height && m.width() == width) return m;
  if (m.height() >= height && m.width() >= width) {
    return downsample_mask(m, height, width);
  }
  FloatField f(m.height(), m.width());
  for (std::size_t k = 0; k < m.size(); ++k) f.values()[k] = m.values()[k];
  return make_mask(resize_bilinear(f, height, width), 0.5);
}

}  // namespace

CategoryData load_category(const CategoryLayout& layout, int height,
                           int width) {
  CategoryData d;
  d.name = layout.name;
  for (const auto& p : layout.train) {
    d.train.push_back(preprocess(read_png(p), height, width));
  }
  for (const auto& e : layout.test) {
    const Image img = read_png(e.image);
    Mask mask(height, width);
    if (e.mask) {
      mask = fit_mask(read_mask_png(*e.mask), height, width);
    }
    d.test.push_back(preprocess(img, height, width));
    d.test_labels.push_back(e.anomalous() ? 1 : 0);
    d.test_masks.push_back(std::move(mask));
  }
  return d;
}

namespace {

using Color = std::array<float, 3>;

constexpr std::array<Color, 8> kPalette = {{
    {0.85f, 0.35f, 0.20f},
    {0.20f, 0.55f, 0.85f},
    {0.30f, 0.75f, 0.35f},
    {0.90f, 0.80f, 0.25f},
    {0.60f, 0.30f, 0.70f},
    {0.25f, 0.25f, 0.30f},
    {0.80f, 0.80f, 0.80f},
    {0.50f, 0.30f, 0.15f},
}};

struct StripePattern {
  double cycles;       // stripes across the image
  double orientation;  // radians
  double phase;
  Color a, b;
};

Image render(const StripePattern& p, int size, double noise, Rng& rng) {
  Image img(3, size, size);
  const double kx = std::cos(p.orientation), ky = std::sin(p.orientation);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x * kx + y * ky) / size;
      const double t = 0.5 + 0.5 * std::sin(6.283185307179586 * p.cycles * u +
                                             p.phase);
      for (int c = 0; c < 3; ++c) {
        const double v = p.a[c] + t * (p.b[c] - p.a[c]) + noise * rng.normal();
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

StripePattern category_pattern(int k, int n, Rng& rng) {
  StripePattern p;
  p.cycles = (2.0 + 2.5 * k) * rng.uniform(0.92, 1.08);
  p.orientation = 3.141592653589793 * k / std::max(n, 1) +
                  rng.uniform(-0.1, 0.1);
  p.phase = rng.uniform(0.0, 6.283185307179586);
  p.a = kPalette[(2 * k) % kPalette.size()];
  p.b = kPalette[(2 * k + 1) % kPalette.size()];
  return p;
}

StripePattern foreign_pattern(Rng& rng) {
  StripePattern p;
  p.cycles = rng.uniform(6.0, 14.0);
  p.orientation = rng.uniform(0.0, 3.141592653589793);
  p.phase = rng.uniform(0.0, 6.283185307179586);
  for (int c = 0; c < 3; ++c) {
    p.a[c] = static_cast<float>(rng.uniform());
    p.b[c] = static_cast<float>(rng.uniform());
  }
  return p;
}

std::string numbered(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", i);
  return buf;
}

constexpr double kPixelNoise = 0.02;

}  // namespace

DatasetLayout make_toy_dataset(const fs::path& out_dir,
                               const ToyDatasetOptions& o) {
  if (o.categories < 1 || o.train_per_category < 1 || o.test_per_class < 1) {
    throw ConfigError("toy dataset counts must be >= 1");
  }
  if (o.image_size < 16 || o.image_size % 16 != 0) {
    throw ConfigError("toy image size must be a positive multiple of 16");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  }
  PerlinConfig defect_cfg;
  defect_cfg.min_scale_exp = 2;
  defect_cfg.max_scale_exp = 3;
  defect_cfg.threshold = 0.6;
  defect_cfg.max_coverage = 0.5;

  const int size = o.image_size;
  for (int k = 0; k < o.categories; ++k) {
    const std::string name = "toy" + numbered(k);
    const fs::path cat = out_dir / name;
    Rng rng(derive_seed(o.seed, name));
    for (int i = 0; i < o.train_per_category; ++i) {
      const Image img =
          render(category_pattern(k, o.categories, rng), size, kPixelNoise, rng);
      write_png(cat / "train" / "good" / (numbered(i) + ".png"), img);
    }
    for (int i = 0; i < o.test_per_class; ++i) {
      const Image img =
          render(category_pattern(k, o.categories, rng), size, kPixelNoise, rng);
      write_png(cat / "test" / "good" / (numbered(i) + ".png"), img);
    }
    for (int i = 0; i < o.test_per_class; ++i) {
      const Image normal =
          render(category_pattern(k, o.categories, rng), size, kPixelNoise, rng);
      const Image texture = render(foreign_pattern(rng), size, 0.0, rng);
      const Mask mask = sample_mask(size, size, defect_cfg, rng);
      const double beta = rng.uniform(0.6, 1.0);
      const SyntheticSample s = synthesize_anomaly(normal, texture, mask, beta);
      write_png(cat / "test" / "defect" / (numbered(i) + ".png"), s.image);
      write_mask_png(cat / "ground_truth" / "defect" / (numbered(i) + "_mask.png"),
                     s.mask);
    }
  }
  return scan_dataset(out_dir);
}

}  // namespace adapts
