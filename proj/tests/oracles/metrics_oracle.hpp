// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar-loop reimplementation of the tracking metrics, using the oracle
// chain walk from reward_oracle.hpp rather than the production kinematics.

#include "motrack/evalbench/metrics.hpp"
#include "reward_oracle.hpp"

namespace motrack::testoracle {

struct OracleMetrics {
  double mpkpe_mm = 0, mpjpe_rad = 0, vel_mm_per_frame = 0;
  bool success = true;
};

inline OracleMetrics metrics_oracle(std::span<const evalbench::FrameRecord> records,
                                    const motiondata::MotionClip& clip,
                                    const simenv::RobotConfig& robot) {
  OracleMetrics m;
  double pos = 0, jnt = 0, vel = 0;
  for (const auto& rec : records) {
    const int f = clip.held(rec.frame);
    const double* key = clip.key_frame(f);
    double acc = 0;
    for (std::size_t k = 0; k < robot.key_bodies.size(); ++k) {
      const OrBody b = oracle_body(robot, robot.key_bodies[k], rec.state.root.x, rec.state.root.z,
                                   rec.state.root.pitch, rec.state.root_vel.vx, rec.state.root_vel.vz,
                                   rec.state.root_vel.w, rec.state.q, rec.state.qd);
      const double dx = b.x - key[3 * k + 0];
      const double dy = -key[3 * k + 1];
      const double dz = b.z - key[3 * k + 2];
      acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    pos += acc / static_cast<double>(robot.key_bodies.size());
    double jacc = 0;
    const double* q = clip.joint_frame(f);
    for (int j = 0; j < robot.num_joints; ++j) jacc += std::fabs(rec.state.q[static_cast<std::size_t>(j)] - q[j]);
    jnt += jacc / robot.num_joints;
    const auto rv = clip.vel(f);
    vel += std::sqrt((rec.state.root_vel.vx - rv.vx) * (rec.state.root_vel.vx - rv.vx) +
                     (rec.state.root_vel.vz - rv.vz) * (rec.state.root_vel.vz - rv.vz));
    if (std::fabs(rec.state.root.z - clip.root_height[static_cast<std::size_t>(f)]) > 0.25) m.success = false;
  }
  const double n = static_cast<double>(records.size());
  m.mpkpe_mm = 1000.0 * pos / n;
  m.mpjpe_rad = jnt / n;
  m.vel_mm_per_frame = 1000.0 * (1.0 / clip.fps) * vel / n;
  return m;
}

}  // namespace motrack::testoracle
