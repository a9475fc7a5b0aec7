// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "motrack/motiondata/clip.hpp"
#include "motrack/simenv/state.hpp"

namespace motrack::simenv {

/// Uniform noise half-widths per observation group, added to the actor's view
/// only. Defaults carry the training-noise table; the previous action is
/// exact by contract (width pinned to zero).
struct NoiseSpec {
  double gravity = 0.1;
  double ang_vel = 0.2;
  double joint_pos = 0.01;
  double joint_vel = 0.5;
  double prev_action = 0.0;
  double ref_gravity = 0.1;
  double ref_lin_vel = 0.1;
  double ref_ang_vel = 0.1;
  double ref_joint = 0.05;
  double ref_height = 0.1;

  void validate() const;
  static NoiseSpec disabled() {
    NoiseSpec n;
    n.gravity = n.ang_vel = n.joint_pos = n.joint_vel = 0.0;
    n.ref_gravity = n.ref_lin_vel = n.ref_ang_vel = n.ref_joint = n.ref_height = 0.0;
    return n;
  }
};

/// Fixed group layout of the observation vector, proprioception first, then
/// the reference lookahead groups, each holding H stacked frames (current
/// frame plus H-1 future, clamped to the clip end).
struct ObsLayout {
  struct Group {
    std::string name;
    int offset = 0;
    int width = 0;
  };
  std::vector<Group> groups;
  int total = 0;
  int prop_dim = 0;   // reference slice is [prop_dim, total)
  int priv_dim = 0;   // appended to the critic view
  int num_joints = 0;
  int lookahead = 0;

  static ObsLayout build(const RobotConfig& robot, int lookahead);

  int ref_dim() const { return total - prop_dim; }
  int critic_dim() const { return total + priv_dim; }
  const Group& group(const std::string& name) const;

  /// Canonical text form of the layout; stable across runs for one config.
  std::string describe() const;
  std::uint64_t hash() const;
};

struct Observations {
  std::vector<double> clean;   // layout order, exact values
  std::vector<double> actor;   // clean + sampled noise
  std::vector<double> critic;  // clean ++ privileged block
};

/// Assembles the clean, actor and critic views for reference frame t.
/// The actor noise draw consumes `rng`; pass the same seed to reproduce it.
/// Throws if t is past the end of the clip.
Observations build_observation(const EnvState& state, const motiondata::MotionClip& clip, int t,
                               const ObsLayout& layout, const NoiseSpec& noise,
                               const RobotConfig& robot, Rng& rng);

/// Training-only supervision targets for the current state and frame.
AuxTargets build_aux_targets(const EnvState& state, const motiondata::MotionClip& clip, int t,
                             const RobotConfig& robot);

}  // namespace motrack::simenv
