// Copyright 2026 The AdapTS Authors.
// SPDX-License-Identifier: Apache-2.0

#include "adapts/container.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adapts/errors.hpp"

namespace adapts {

static_assert(std::endian::native == std::endian::little,
              "weight container I/O assumes a little-endian host");

namespace {

const char* dtype_name(DType d) { return d == DType::kF32 ? "f32" : "i8"; }

std::string shape_str(const std::vector<std::int64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw LoadError("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

std::size_t StoredTensor::numel() const { return shape_numel(shape); }

std::size_t StoredTensor::byte_size() const {
  return dtype == DType::kF32 ? f32.size() * 4 : i8.size();
}

void WeightContainer::put_f32(const std::string& name,
                              std::vector<std::int64_t> shape,
                              std::span<const float> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor '" + name + "': shape " + shape_str(shape) +
                     " does not match " + std::to_string(values.size()) +
                     " values");
  }
  StoredTensor t;
  t.shape = std::move(shape);
  t.dtype = DType::kF32;
  t.f32.assign(values.begin(), values.end());
  tensors_[name] = std::move(t);
}

void WeightContainer::put_i8(const std::string& name,
                             std::vector<std::int64_t> shape,
                             std::span<const std::int8_t> values, float scale) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor '" + name + "': shape/value count mismatch");
  }
  StoredTensor t;
  t.shape = std::move(shape);
  t.dtype = DType::kI8;
  t.i8.assign(values.begin(), values.end());
  t.scale = scale;
  tensors_[name] = std::move(t);
}

bool WeightContainer::contains(const std::string& name) const {
  return tensors_.count(name) > 0;
}

const StoredTensor& WeightContainer::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw LoadError("missing tensor '" + name + "'");
  }
  return it->second;
}

const std::vector<float>& WeightContainer::expect_f32(
    const std::string& name, const std::vector<std::int64_t>& shape) const {
  const StoredTensor& t = get(name);
  if (t.dtype != DType::kF32) {
    throw LoadError("tensor '" + name + "': expected dtype f32");
  }
  if (t.shape != shape) {
    throw LoadError("shape mismatch for tensor '" + name + "': expected " +
                    shape_str(shape) + ", found " + shape_str(t.shape));
  }
  return t.f32;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("sha256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

std::span<const std::uint8_t> payload_bytes(const StoredTensor& t) {
  if (t.dtype == DType::kF32) {
    return {reinterpret_cast<const std::uint8_t*>(t.f32.data()),
            t.f32.size() * sizeof(float)};
  }
  return {reinterpret_cast<const std::uint8_t*>(t.i8.data()), t.i8.size()};
}

}  // namespace

void WeightContainer::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  nlohmann::json manifest = metadata_;
  nlohmann::json entries = nlohmann::json::object();
  std::ofstream bin(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + (dir / "tensors.bin").string());
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    auto bytes = payload_bytes(t);
    bin.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    nlohmann::json e;
    e["shape"] = t.shape;
    e["dtype"] = dtype_name(t.dtype);
    e["byte_offset"] = offset;
    e["sha256"] = sha256_hex(bytes);
    if (t.dtype == DType::kI8) e["scale"] = t.scale;
    entries[name] = std::move(e);
    offset += bytes.size();
  }
  if (!bin) throw IoError("write failed: " + (dir / "tensors.bin").string());
  manifest["tensors"] = std::move(entries);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

WeightContainer WeightContainer::load(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed manifest in " + dir.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw LoadError(e.what());
  }
  std::ifstream bin(dir / "tensors.bin", std::ios::binary);
  if (!bin) throw LoadError("missing " + (dir / "tensors.bin").string());
  std::vector<char> blob((std::istreambuf_iterator<char>(bin)),
                         std::istreambuf_iterator<char>());

  WeightContainer out;
  if (!manifest.contains("tensors") || !manifest["tensors"].is_object()) {
    throw LoadError("manifest has no tensor table");
  }
  for (const auto& [name, e] : manifest["tensors"].items()) {
    StoredTensor t;
    try {
      t.shape = e.at("shape").get<std::vector<std::int64_t>>();
      const std::string dtype = e.at("dtype").get<std::string>();
      const auto offset = e.at("byte_offset").get<std::uint64_t>();
      const std::size_t n = shape_numel(t.shape);
      std::size_t nbytes;
      if (dtype == "f32") {
        t.dtype = DType::kF32;
        nbytes = n * 4;
      } else if (dtype == "i8") {
        t.dtype = DType::kI8;
        nbytes = n;
        t.scale = e.at("scale").get<float>();
      } else {
        throw LoadError("tensor '" + name + "': unknown dtype " + dtype);
      }
      if (offset + nbytes > blob.size()) {
        throw LoadError("tensor '" + name + "': payload out of range");
      }
      std::span<const std::uint8_t> bytes(
          reinterpret_cast<const std::uint8_t*>(blob.data()) + offset, nbytes);
      if (sha256_hex(bytes) != e.at("sha256").get<std::string>()) {
        throw LoadError("checksum failure for tensor '" + name + "'");
      }
      if (t.dtype == DType::kF32) {
        t.f32.resize(n);
        std::memcpy(t.f32.data(), bytes.data(), nbytes);
      } else {
        t.i8.resize(n);
        std::memcpy(t.i8.data(), bytes.data(), nbytes);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw LoadError("tensor '" + name + "': malformed entry: " + ex.what());
    }
    out.tensors_[name] = std::move(t);
  }
  manifest.erase("tensors");
  out.metadata_ = std::move(manifest);
  return out;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace adapts
