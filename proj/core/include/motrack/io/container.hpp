// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace motrack::io {

using json = nlohmann::json;

// Versioned binary container: 4-byte magic, u32 version, u64 header length,
// UTF-8 JSON header, raw payload. All integers and floats are encoded
// little-endian regardless of host byte order. The header carries free-form
// metadata plus a blob index (name, dtype, offset, count).
class ContainerWriter {
 public:
  ContainerWriter(std::string magic, std::uint32_t version);

  json& meta() { return meta_; }

  void add_f64(const std::string& name, std::span<const double> data);
  void add_f32(const std::string& name, std::span<const float> data);
  void add_i64(const std::string& name, std::span<const std::int64_t> data);
  void add_u8(const std::string& name, std::span<const std::uint8_t> data);

  std::vector<std::uint8_t> to_bytes() const;
  void write_file(const std::filesystem::path& path) const;

 private:
  struct Blob {
    std::string name;
    std::string dtype;
    std::vector<std::uint8_t> bytes;
    std::uint64_t count = 0;
  };
  std::string magic_;
  std::uint32_t version_;
  json meta_;
  std::vector<Blob> blobs_;
};

class ContainerReader {
 public:
  static ContainerReader from_bytes(std::vector<std::uint8_t> bytes, const std::string& expected_magic);
  static ContainerReader from_file(const std::filesystem::path& path, const std::string& expected_magic);

  std::uint32_t version() const { return version_; }
  const json& meta() const { return meta_; }

  bool has(const std::string& name) const;
  std::vector<double> f64(const std::string& name) const;
  std::vector<float> f32(const std::string& name) const;
  std::vector<std::int64_t> i64(const std::string& name) const;
  std::vector<std::uint8_t> u8(const std::string& name) const;

 private:
  struct Entry {
    std::string dtype;
    std::uint64_t offset = 0;
    std::uint64_t count = 0;
  };
  const Entry& entry(const std::string& name, const std::string& dtype) const;

  std::uint32_t version_ = 0;
  json meta_;
  std::vector<std::uint8_t> payload_;
  std::vector<std::pair<std::string, Entry>> index_;
};

// little-endian scalar packing, host-order independent
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64_le(std::vector<std::uint8_t>& out, double v);
void put_f32_le(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32_le(const std::uint8_t* p);
std::uint64_t get_u64_le(const std::uint8_t* p);
double get_f64_le(const std::uint8_t* p);
float get_f32_le(const std::uint8_t* p);

}  // namespace motrack::io
