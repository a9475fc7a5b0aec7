// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/io/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "motrack/common.hpp"

namespace motrack::io {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::vector<std::uint8_t>& out, double v) { put_u64_le(out, std::bit_cast<std::uint64_t>(v)); }
void put_f32_le(std::vector<std::uint8_t>& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32_le(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double get_f64_le(const std::uint8_t* p) { return std::bit_cast<double>(get_u64_le(p)); }
float get_f32_le(const std::uint8_t* p) { return std::bit_cast<float>(get_u32_le(p)); }

ContainerWriter::ContainerWriter(std::string magic, std::uint32_t version)
    : magic_(std::move(magic)), version_(version), meta_(json::object()) {
  if (magic_.size() != 4) fail("container: magic must be 4 bytes");
}

void ContainerWriter::add_f64(const std::string& name, std::span<const double> data) {
  Blob b{name, "f64", {}, data.size()};
  b.bytes.reserve(data.size() * 8);
  for (double v : data) put_f64_le(b.bytes, v);
  blobs_.push_back(std::move(b));
}

void ContainerWriter::add_f32(const std::string& name, std::span<const float> data) {
  Blob b{name, "f32", {}, data.size()};
  b.bytes.reserve(data.size() * 4);
  for (float v : data) put_f32_le(b.bytes, v);
  blobs_.push_back(std::move(b));
}

void ContainerWriter::add_i64(const std::string& name, std::span<const std::int64_t> data) {
  Blob b{name, "i64", {}, data.size()};
  b.bytes.reserve(data.size() * 8);
  for (std::int64_t v : data) put_u64_le(b.bytes, static_cast<std::uint64_t>(v));
  blobs_.push_back(std::move(b));
}

void ContainerWriter::add_u8(const std::string& name, std::span<const std::uint8_t> data) {
  Blob b{name, "u8", {data.begin(), data.end()}, data.size()};
  blobs_.push_back(std::move(b));
}

std::vector<std::uint8_t> ContainerWriter::to_bytes() const {
  json header = meta_;
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& b : blobs_) {
    index.push_back({{"name", b.name}, {"dtype", b.dtype}, {"offset", offset}, {"count", b.count}});
    offset += b.bytes.size();
  }
  header["blobs"] = std::move(index);
  const std::string hs = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), magic_.begin(), magic_.end());
  put_u32_le(out, version_);
  put_u64_le(out, hs.size());
  out.insert(out.end(), hs.begin(), hs.end());
  for (const auto& b : blobs_) out.insert(out.end(), b.bytes.begin(), b.bytes.end());
  return out;
}

void ContainerWriter::write_file(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("container: cannot open for write: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail("container: write failed: " + path.string());
}

ContainerReader ContainerReader::from_bytes(std::vector<std::uint8_t> bytes, const std::string& expected_magic) {
  if (bytes.size() < 16) fail("container: truncated file");
  if (std::string(bytes.begin(), bytes.begin() + 4) != expected_magic)
    fail("container: bad magic (expected '" + expected_magic + "')");
  ContainerReader r;
  r.version_ = get_u32_le(bytes.data() + 4);
  const std::uint64_t hlen = get_u64_le(bytes.data() + 8);
  if (16 + hlen > bytes.size()) fail("container: truncated header");
  r.meta_ = json::parse(std::string(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen)));
  r.payload_.assign(bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen), bytes.end());
  if (r.meta_.contains("blobs")) {
    for (const auto& e : r.meta_["blobs"]) {
      Entry ent{e.at("dtype").get<std::string>(), e.at("offset").get<std::uint64_t>(),
                e.at("count").get<std::uint64_t>()};
      r.index_.emplace_back(e.at("name").get<std::string>(), ent);
    }
  }
  return r;
}

ContainerReader ContainerReader::from_file(const std::filesystem::path& path, const std::string& expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("container: cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_bytes(std::move(bytes), expected_magic);
}

bool ContainerReader::has(const std::string& name) const {
  for (const auto& [n, e] : index_)
    if (n == name) return true;
  return false;
}

const ContainerReader::Entry& ContainerReader::entry(const std::string& name, const std::string& dtype) const {
  for (const auto& [n, e] : index_) {
    if (n == name) {
      if (e.dtype != dtype) fail("container: blob '" + name + "' has dtype " + e.dtype + ", wanted " + dtype);
      return e;
    }
  }
  fail("container: missing blob '" + name + "'");
}

std::vector<double> ContainerReader::f64(const std::string& name) const {
  const Entry& e = entry(name, "f64");
  if (e.offset + e.count * 8 > payload_.size()) fail("container: blob out of range: " + name);
  std::vector<double> out(e.count);
  for (std::uint64_t i = 0; i < e.count; ++i) out[i] = get_f64_le(payload_.data() + e.offset + i * 8);
  return out;
}

std::vector<float> ContainerReader::f32(const std::string& name) const {
  const Entry& e = entry(name, "f32");
  if (e.offset + e.count * 4 > payload_.size()) fail("container: blob out of range: " + name);
  std::vector<float> out(e.count);
  for (std::uint64_t i = 0; i < e.count; ++i) out[i] = get_f32_le(payload_.data() + e.offset + i * 4);
  return out;
}

std::vector<std::int64_t> ContainerReader::i64(const std::string& name) const {
  const Entry& e = entry(name, "i64");
  if (e.offset + e.count * 8 > payload_.size()) fail("container: blob out of range: " + name);
  std::vector<std::int64_t> out(e.count);
  for (std::uint64_t i = 0; i < e.count; ++i)
    out[i] = static_cast<std::int64_t>(get_u64_le(payload_.data() + e.offset + i * 8));
  return out;
}

std::vector<std::uint8_t> ContainerReader::u8(const std::string& name) const {
  const Entry& e = entry(name, "u8");
  if (e.offset + e.count > payload_.size()) fail("container: blob out of range: " + name);
  return {payload_.begin() + static_cast<std::ptrdiff_t>(e.offset),
          payload_.begin() + static_cast<std::ptrdiff_t>(e.offset + e.count)};
}

}  // namespace motrack::io
