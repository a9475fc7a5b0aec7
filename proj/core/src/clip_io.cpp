// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/motiondata/clip_io.hpp"

#include <fstream>

#include "motrack/io/container.hpp"

namespace motrack::motiondata {

using io::ContainerReader;
using io::ContainerWriter;

std::vector<std::uint8_t> clip_to_bytes(const MotionClip& clip) {
  ContainerWriter w("MCLP", kClipFormatVersion);
  w.meta()["id"] = clip.id;
  w.meta()["source"] = clip.source;
  w.meta()["fps"] = clip.fps;
  w.meta()["frames"] = clip.frames();
  w.meta()["num_joints"] = clip.num_joints;
  w.meta()["num_key_bodies"] = clip.num_key_bodies;
  w.meta()["num_end_effectors"] = clip.num_end_effectors;
  w.add_f64("root_pose", clip.root_pose);
  w.add_f64("root_vel", clip.root_vel);
  w.add_f64("joints", clip.joints);
  w.add_f64("key_pos", clip.key_pos);
  w.add_f64("proj_gravity", clip.proj_gravity);
  w.add_f64("root_height", clip.root_height);
  w.add_u8("contacts", clip.contacts);
  return w.to_bytes();
}

MotionClip clip_from_bytes(const std::vector<std::uint8_t>& bytes) {
  ContainerReader r = ContainerReader::from_bytes(bytes, "MCLP");
  if (r.version() != kClipFormatVersion)
    fail("read_clip: unsupported format version " + std::to_string(r.version()));
  MotionClip c;
  c.id = r.meta().at("id").get<std::string>();
  c.source = r.meta().at("source").get<std::string>();
  c.fps = r.meta().at("fps").get<double>();
  c.num_joints = r.meta().at("num_joints").get<int>();
  c.num_key_bodies = r.meta().at("num_key_bodies").get<int>();
  c.num_end_effectors = r.meta().at("num_end_effectors").get<int>();
  c.root_pose = r.f64("root_pose");
  c.root_vel = r.f64("root_vel");
  c.joints = r.f64("joints");
  c.key_pos = r.f64("key_pos");
  c.proj_gravity = r.f64("proj_gravity");
  c.root_height = r.f64("root_height");
  c.contacts = r.u8("contacts");
  return c;
}

void write_clip(const MotionClip& clip, const std::filesystem::path& path) {
  const auto bytes = clip_to_bytes(clip);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("write_clip: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail("write_clip: write failed " + path.string());
}

MotionClip read_clip(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("read_clip: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return clip_from_bytes(bytes);
}

void pack_library(const ClipLibrary& lib, const std::filesystem::path& path) {
  if (lib.size() == 0) fail("pack_library: refusing to write an empty library");
  ContainerWriter w("MPAK", kPackFormatVersion);
  io::json index = io::json::array();
  std::vector<std::uint8_t> all;
  for (int i = 0; i < lib.size(); ++i) {
    const auto bytes = clip_to_bytes(lib.clip(i));
    index.push_back({{"id", lib.clip(i).id},
                     {"source", lib.clip(i).source},
                     {"offset", all.size()},
                     {"length", bytes.size()}});
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  w.meta()["clips"] = std::move(index);
  w.meta()["count"] = lib.size();
  w.add_u8("payload", all);
  w.write_file(path);
}

ClipLibrary load_library(const std::filesystem::path& path) {
  ContainerReader r = ContainerReader::from_file(path, "MPAK");
  if (r.version() != kPackFormatVersion)
    fail("load_library: unsupported format version " + std::to_string(r.version()));
  const auto payload = r.u8("payload");
  ClipLibrary lib;
  for (const auto& e : r.meta().at("clips")) {
    const auto off = e.at("offset").get<std::size_t>();
    const auto len = e.at("length").get<std::size_t>();
    if (off + len > payload.size()) fail("load_library: clip range out of bounds");
    std::vector<std::uint8_t> bytes(payload.begin() + static_cast<std::ptrdiff_t>(off),
                                    payload.begin() + static_cast<std::ptrdiff_t>(off + len));
    lib.add(clip_from_bytes(bytes));
  }
  return lib;
}

}  // namespace motrack::motiondata
