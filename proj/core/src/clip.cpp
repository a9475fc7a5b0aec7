// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/motiondata/clip.hpp"

#include <algorithm>
#include <numeric>

namespace motrack::motiondata {

void MotionClip::joint_velocity(int f, std::vector<double>& out) const {
  out.resize(static_cast<std::size_t>(num_joints));
  const int f0 = held(f);
  const int f1 = held(f + 1);
  const double dt = 1.0 / fps;
  const double* a = joint_frame(f0);
  const double* b = joint_frame(f1);
  for (int j = 0; j < num_joints; ++j) out[static_cast<std::size_t>(j)] = (b[j] - a[j]) / dt;
}

void MotionClip::validate(int min_frames) const {
  if (id.empty()) fail("MotionClip: empty id");
  if (source.empty()) fail("MotionClip: empty source tag");
  if (fps <= 0) fail("MotionClip: fps must be positive");
  const int f = frames();
  if (f < min_frames) fail("MotionClip '" + id + "': too short (" + std::to_string(f) + " frames)");
  auto chk = [&](std::size_t actual, std::size_t expect, const char* what) {
    if (actual != expect) fail("MotionClip '" + id + "': bad array size for " + std::string(what));
  };
  const auto F = static_cast<std::size_t>(f);
  chk(root_pose.size(), F * 3, "root_pose");
  chk(root_vel.size(), F * 3, "root_vel");
  chk(joints.size(), F * static_cast<std::size_t>(num_joints), "joints");
  chk(key_pos.size(), F * static_cast<std::size_t>(num_key_bodies) * 3, "key_pos");
  chk(proj_gravity.size(), F * 3, "proj_gravity");
  chk(contacts.size(), F * static_cast<std::size_t>(num_end_effectors), "contacts");
  for (double v : root_pose)
    if (!std::isfinite(v)) fail("MotionClip '" + id + "': non-finite root pose");
  for (double v : joints)
    if (!std::isfinite(v)) fail("MotionClip '" + id + "': non-finite joints");
  for (double v : key_pos)
    if (!std::isfinite(v)) fail("MotionClip '" + id + "': non-finite key positions");
}

void ClipLibrary::add(MotionClip clip) {
  if (by_id_.count(clip.id)) fail("ClipLibrary: duplicate clip id '" + clip.id + "'");
  if (clip.source.empty()) fail("ClipLibrary: clip '" + clip.id + "' has empty source tag");
  const int idx = static_cast<int>(clips_.size());
  by_id_[clip.id] = idx;
  auto it = by_source_.find(clip.source);
  if (it == by_source_.end()) {
    sources_.push_back(clip.source);
    by_source_[clip.source] = {idx};
    source_weights_.push_back(1.0);
  } else {
    it->second.push_back(idx);
  }
  clips_.push_back(std::move(clip));
}

const MotionClip* ClipLibrary::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &clips_[static_cast<std::size_t>(it->second)];
}

const std::vector<int>& ClipLibrary::clips_of(const std::string& source) const {
  auto it = by_source_.find(source);
  if (it == by_source_.end()) fail("ClipLibrary: unknown source '" + source + "'");
  return it->second;
}

void ClipLibrary::set_source_weights(const std::map<std::string, double>& w) {
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    auto it = w.find(sources_[i]);
    if (it == w.end()) fail("ClipLibrary: missing weight for source '" + sources_[i] + "'");
    if (it->second <= 0) fail("ClipLibrary: weights must be positive");
    source_weights_[i] = it->second;
  }
}

int ClipLibrary::sample(Rng& rng) const {
  if (clips_.empty()) fail("ClipLibrary: empty");
  const double total = std::accumulate(source_weights_.begin(), source_weights_.end(), 0.0);
  double u = uniform(rng, 0.0, total);
  std::size_t si = 0;
  for (; si + 1 < sources_.size(); ++si) {
    if (u < source_weights_[si]) break;
    u -= source_weights_[si];
  }
  const auto& ids = by_source_.at(sources_[si]);
  const auto k = static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(ids.size())));
  return ids[std::min(k, ids.size() - 1)];
}

void ClipLibrary::validate(int min_frames) const {
  if (clips_.empty()) fail("ClipLibrary: empty");
  for (const auto& c : clips_) c.validate(min_frames);
}

}  // namespace motrack::motiondata
