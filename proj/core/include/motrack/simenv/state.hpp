// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "motrack/simenv/robot.hpp"

namespace motrack::simenv {

/// Full simulated robot state plus episode bookkeeping.
struct EnvState {
  Pose2 root;
  Vel2 root_vel;
  std::vector<double> q, qd, qdd;
  std::vector<double> prev_action;
  std::array<double, 3> g_proj{0.0, 0.0, -1.0};
  std::vector<std::uint8_t> contact;       // per end effector
  std::vector<double> contact_force;      // per end effector, N analog
  int step = 0;                            // episode step counter
  int clip_index = -1;
  int phase = 0;                           // current reference frame

  void init(int num_joints, int num_ee) {
    q.assign(static_cast<std::size_t>(num_joints), 0.0);
    qd.assign(static_cast<std::size_t>(num_joints), 0.0);
    qdd.assign(static_cast<std::size_t>(num_joints), 0.0);
    prev_action.assign(static_cast<std::size_t>(num_joints), 0.0);
    contact.assign(static_cast<std::size_t>(num_ee), 0);
    contact_force.assign(static_cast<std::size_t>(num_ee), 0.0);
    root = {};
    root_vel = {};
    g_proj = {0.0, 0.0, -1.0};
    step = 0;
    phase = 0;
  }
};

/// Training-only supervision targets captured from the clean simulator state.
struct AuxTargets {
  std::array<double, 3> root_lin_vel{};          // world, plane embedded
  std::vector<std::uint8_t> contacts;            // K_c end effectors
  std::vector<double> ref_keypos_rel;            // 3 * K_p, reference root frame
  std::vector<double> robot_keypos_rel;          // 3 * K_p, robot root frame
};

}  // namespace motrack::simenv
