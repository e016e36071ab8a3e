// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

// Directory-based weight container:
//
//   <dir>/manifest.json   tensor name -> {shape, dtype, byte_offset, sha256
//                         [, scale]} under "tensors", plus free-form
//                         metadata keys at the top level.
//   <dir>/tensors.bin     concatenated little-endian payloads, ordered by
//                         tensor name.
//
// Payloads round-trip bit-exactly. dtype is "f32" or "i8"; i8 entries carry
// a float32 per-tensor scale.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace adapts {

enum class DType { kF32, kI8 };

struct StoredTensor {
  std::vector<std::int64_t> shape;
  DType dtype = DType::kF32;
  std::vector<float> f32;
  std::vector<std::int8_t> i8;
  float scale = 1.0f;  // i8 only

  std::size_t numel() const;
  std::size_t byte_size() const;
};

class WeightContainer {
 public:
  void put_f32(const std::string& name, std::vector<std::int64_t> shape,
               std::span<const float> values);
  void put_i8(const std::string& name, std::vector<std::int64_t> shape,
              std::span<const std::int8_t> values, float scale);

  bool contains(const std::string& name) const;
  // Throws LoadError("missing tensor '<name>'") when absent.
  const StoredTensor& get(const std::string& name) const;
  // Fetches an f32 tensor and checks its shape; throws LoadError naming the
  // tensor on mismatch.
  const std::vector<float>& expect_f32(
      const std::string& name, const std::vector<std::int64_t>& shape) const;

  const std::map<std::string, StoredTensor>& tensors() const {
    return tensors_;
  }

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  void save(const std::filesystem::path& dir) const;
  static WeightContainer load(const std::filesystem::path& dir);

 private:
  std::map<std::string, StoredTensor> tensors_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Writes text to a file, replacing it and creating parent directories.
// Throws IoError.
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace adapts
