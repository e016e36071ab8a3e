// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "adapts/errors.hpp"
#include "adapts/ops.hpp"

namespace adapts {

namespace {

std::vector<std::uint8_t> read_raw(const std::filesystem::path& path,
                                   png_uint_32 format, int& h, int& w) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG '" + path.string() + "': " + img.message);
  }
  h = static_cast<int>(img.height);
  w = static_cast<int>(img.width);
  return buf;
}

void write_raw(const std::filesystem::path& path, png_uint_32 format, int h,
               int w, const std::vector<std::uint8_t>& buf) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.format = format;
  img.height = static_cast<png_uint_32>(h);
  img.width = static_cast<png_uint_32>(w);
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0,
                               nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + img.message);
  }
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto buf = read_raw(path, PNG_FORMAT_RGB, h, w);
  Image out(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(c, y, x) =
            buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
      }
    }
  }
  return out;
}

std::pair<int, int> png_size(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  const std::pair<int, int> hw{static_cast<int>(img.height),
                               static_cast<int>(img.width)};
  png_image_free(&img);
  return hw;
}

Mask read_mask_png(const std::filesystem::path& path) {
  int h = 0, w = 0;
  const auto buf = read_raw(path, PNG_FORMAT_GRAY, h, w);
  Mask m(h, w);
  for (std::size_t k = 0; k < m.size(); ++k) m.values()[k] = buf[k] >= 128;
  return m;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw ShapeError("write_png expects 3 channels");
  const int h = image.height(), w = image.width();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            to_byte(image.at(c, y, x));
      }
    }
  }
  write_raw(path, PNG_FORMAT_RGB, h, w, buf);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t k = 0; k < buf.size(); ++k) {
    buf[k] = mask.values()[k] ? 255 : 0;
  }
  write_raw(path, PNG_FORMAT_GRAY, mask.height(), mask.width(), buf);
}

void write_heatmap_png(const std::filesystem::path& path,
                       const FloatField& map, float max_value) {
  const float denom = max_value > 0.0f ? max_value : 1.0f;
  std::vector<std::uint8_t> buf(map.size());
  for (std::size_t k = 0; k < buf.size(); ++k) {
    buf[k] = to_byte(map.values()[k] / denom);
  }
  write_raw(path, PNG_FORMAT_GRAY, map.height(), map.width(), buf);
}

Image preprocess(const Image& image, int height, int width) {
  if (image.height() == height && image.width() == width) return image;
  return resize_bilinear(image, height, width);
}

}  // namespace adapts
