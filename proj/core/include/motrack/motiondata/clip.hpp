// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "motrack/common.hpp"
#include "motrack/simenv/robot.hpp"

namespace motrack::motiondata {

/// One reference trajectory sampled at the control rate. Per-frame arrays are
/// stored flat; `frames()` is the authoritative length.
struct MotionClip {
  std::string id;
  std::string source;  // dataset tag used for macro-averaged evaluation
  double fps = 50.0;
  int num_joints = 0;
  int num_key_bodies = 0;
  int num_end_effectors = 0;

  // flat per-frame payloads
  std::vector<double> root_pose;    // F x 3 (x, z, pitch)
  std::vector<double> root_vel;     // F x 3 (vx, vz, pitch rate)
  std::vector<double> joints;       // F x J
  std::vector<double> key_pos;      // F x K x 3, world, plane embedded (x, 0, z)
  std::vector<double> proj_gravity; // F x 3
  std::vector<double> root_height;  // F
  std::vector<std::uint8_t> contacts;  // F x E

  int frames() const { return static_cast<int>(root_height.size()); }

  simenv::Pose2 pose(int f) const {
    return {root_pose[3 * f + 0], root_pose[3 * f + 1], root_pose[3 * f + 2]};
  }
  simenv::Vel2 vel(int f) const {
    return {root_vel[3 * f + 0], root_vel[3 * f + 1], root_vel[3 * f + 2]};
  }
  const double* joint_frame(int f) const { return joints.data() + static_cast<std::size_t>(f) * num_joints; }
  const double* key_frame(int f) const {
    return key_pos.data() + static_cast<std::size_t>(f) * num_key_bodies * 3;
  }
  const double* gravity_frame(int f) const { return proj_gravity.data() + static_cast<std::size_t>(f) * 3; }
  const std::uint8_t* contact_frame(int f) const {
    return contacts.data() + static_cast<std::size_t>(f) * num_end_effectors;
  }

  /// Clamp-to-end frame index; reference lookahead holds the final frame.
  int held(int f) const { return f < frames() ? (f < 0 ? 0 : f) : frames() - 1; }

  /// Forward-difference joint velocity at frame f (last frame repeats).
  void joint_velocity(int f, std::vector<double>& out) const;

  void validate(int min_frames) const;
};

/// Immutable after load; grouped by source tag, with per-source weighted
/// sampling. Safe for concurrent reads.
class ClipLibrary {
 public:
  void add(MotionClip clip);

  int size() const { return static_cast<int>(clips_.size()); }
  const MotionClip& clip(int i) const { return clips_[static_cast<std::size_t>(i)]; }
  const MotionClip* find(const std::string& id) const;

  const std::vector<std::string>& sources() const { return sources_; }
  const std::vector<int>& clips_of(const std::string& source) const;

  /// Per-source sampling weights; normalized internally. Unset sources keep
  /// weight proportional to nothing (they must all be set or none).
  void set_source_weights(const std::map<std::string, double>& w);

  /// Weighted source, then uniform clip within the source.
  int sample(Rng& rng) const;

  void validate(int min_frames) const;

 private:
  std::vector<MotionClip> clips_;
  std::map<std::string, int> by_id_;
  std::vector<std::string> sources_;                    // insertion order
  std::map<std::string, std::vector<int>> by_source_;
  std::vector<double> source_weights_;                  // aligned with sources_
};

using ClipLibraryPtr = std::shared_ptr<const ClipLibrary>;

}  // namespace motrack::motiondata
