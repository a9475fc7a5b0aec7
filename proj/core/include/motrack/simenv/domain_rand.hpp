// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "motrack/simenv/state.hpp"

namespace motrack::simenv {

struct Range {
  double lo = 0.0, hi = 0.0;
  double sample(Rng& rng) const {
    if (lo > hi) fail("Range: inverted bounds");
    return lo == hi ? lo : uniform(rng, lo, hi);
  }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Per-episode sampling ranges; defaults carry the training randomization
/// table. The planar model consumes the in-plane components; lateral and
/// roll/yaw draws are still sampled and recorded so ranges stay testable.
struct DomainRandSpec {
  bool enabled = true;

  int action_delay_max = 2;                  // uniform over {0..max} control steps
  Range terrain_height{0.0, 0.04};           // m, per grid cell
  double terrain_cell = 0.1;                 // m grid spacing

  Range friction_static{0.3, 1.6};
  Range friction_dynamic{0.3, 1.2};
  Range restitution{0.0, 0.5};
  Range default_joint_offset{-0.01, 0.01};
  Range mass_offset{-1.0, 2.0};              // kg on a 5 kg nominal trunk
  Range com_offset_x{-0.075, 0.075};
  Range com_offset_y{-0.1, 0.1};
  Range com_offset_z{-0.1, 0.1};
  Range pd_gain_scale{0.9, 1.1};

  Range init_pos_xy{-0.05, 0.05};
  Range init_pos_z{-0.01, 0.01};
  Range init_rot_rollpitch{-0.1, 0.1};
  Range init_rot_yaw{-0.2, 0.2};
  Range init_vel_xy{-0.5, 0.5};
  Range init_vel_z{-0.2, 0.2};
  Range init_joint{-0.1, 0.1};

  Range push_interval_s{1.0, 3.0};
  Range push_vel_xy{-0.5, 0.5};
  Range push_vel_z{-0.2, 0.2};
  Range push_ang_rollpitch{-0.52, 0.52};
  Range push_ang_yaw{-0.78, 0.78};

  static DomainRandSpec disabled() {
    DomainRandSpec s;
    s.enabled = false;
    return s;
  }
};

/// Flat per-episode ground height field.
struct GroundField {
  double cell = 0.1;
  double origin = -10.0;
  std::vector<double> offsets;  // empty -> flat

  double height_at(double x) const {
    if (offsets.empty()) return 0.0;
    auto idx = static_cast<std::ptrdiff_t>(std::floor((x - origin) / cell));
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(offsets.size()) - 1);
    return offsets[static_cast<std::size_t>(idx)];
  }
};

struct InitPerturbation {
  double dx = 0, dy = 0, dz = 0;
  double droll = 0, dpitch = 0, dyaw = 0;
  double dvx = 0, dvy = 0, dvz = 0;
  std::vector<double> dq;
};

/// Everything sampled once per episode.
struct EpisodeParams {
  int action_delay = 0;
  GroundField ground;
  double friction_static = 1.0;
  double friction_dynamic = 1.0;
  double restitution = 0.0;
  std::vector<double> q0_offset;
  double mass_offset = 0.0;
  std::array<double, 3> com_offset{0, 0, 0};
  double kp_scale = 1.0;
  double kd_scale = 1.0;
  InitPerturbation init;

  static EpisodeParams neutral(int num_joints);
};

EpisodeParams sample_episode_params(const DomainRandSpec& spec, int num_joints, Rng& rng);

struct PushSample {
  double vx = 0, vy = 0, vz = 0;
  double wroll = 0, wpitch = 0, wyaw = 0;
};

/// Samples one random push and adds the in-plane components to the root
/// velocity. Returns the full sample for range verification.
PushSample apply_push(EnvState& state, const DomainRandSpec& spec, Rng& rng);

}  // namespace motrack::simenv
