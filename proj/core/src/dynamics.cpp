// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace motrack::simenv {

void action_to_target(const RobotConfig& robot, const EpisodeParams& params,
                      std::span<const double> action, std::span<double> q_tar) {
  for (int j = 0; j < robot.num_joints; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    q_tar[sj] = robot.q0[sj] + params.q0_offset[sj] + robot.action_scale[sj] * action[sj];
  }
}

void pd_torque(const RobotConfig& robot, const EpisodeParams& params, std::span<const double> q_tar,
               std::span<const double> q, std::span<const double> qd, std::span<double> tau) {
  for (int j = 0; j < robot.num_joints; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    double t = robot.kp[sj] * params.kp_scale * (q_tar[sj] - q[sj]) -
               robot.kd[sj] * params.kd_scale * qd[sj];
    tau[sj] = std::clamp(t, -dyn::kTorqueLimit, dyn::kTorqueLimit);
  }
}

void apply_action(EnvState& state, std::span<const double> action, const RobotConfig& robot,
                  const EpisodeParams& params) {
  const auto J = static_cast<std::size_t>(robot.num_joints);
  if (action.size() != J) fail("apply_action: action size mismatch");
  for (double a : action)
    if (!std::isfinite(a)) fail("apply_action: non-finite action");

  std::vector<double> q_tar(J), tau(J);
  action_to_target(robot, params, action, q_tar);

  const double h = robot.control_dt / robot.substeps;
  const double mass_scale = (dyn::kTrunkMass + params.mass_offset) / dyn::kTrunkMass;
  const std::vector<double> qd_before = state.qd;

  std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  bool was_supported = false;
  {
    forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);
    for (int b : robot.allowed_contacts)
      was_supported |= body[static_cast<std::size_t>(b)].pos.z <=
                       params.ground.height_at(body[static_cast<std::size_t>(b)].pos.x);
  }

  for (int sub = 0; sub < robot.substeps; ++sub) {
    // joint PD, unit inertia
    pd_torque(robot, params, q_tar, state.q, state.qd, tau);
    for (std::size_t j = 0; j < J; ++j) {
      state.qd[j] = std::clamp(state.qd[j] + tau[j] * h, -dyn::kJointVelLimit, dyn::kJointVelLimit);
      state.q[j] += state.qd[j] * h;
    }

    forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);

    // contact state of every end effector
    bool supported = false;
    double paddle = 0.0;
    double support_x = state.root.x;
    int n_contact = 0;
    double z_sup = -1e9;
    for (int e = 0; e < robot.num_ee(); ++e) {
      const int bid = robot.end_effectors[static_cast<std::size_t>(e)];
      const auto& b = body[static_cast<std::size_t>(bid)];
      const double ground = params.ground.height_at(b.pos.x);
      const double pen = ground - b.pos.z;
      state.contact[static_cast<std::size_t>(e)] = pen >= 0.0 ? 1 : 0;
      state.contact_force[static_cast<std::size_t>(e)] = std::max(0.0, pen) * dyn::kContactStiffness;
      const bool allowed = std::find(robot.allowed_contacts.begin(), robot.allowed_contacts.end(), bid) !=
                           robot.allowed_contacts.end();
      if (allowed) {
        // support height: root z that rests this foot exactly on its ground
        z_sup = std::max(z_sup, ground - (b.pos.z - state.root.z));
        if (pen >= 0.0) {
          supported = true;
          paddle += b.vel.x;
          support_x += b.pos.x;
          ++n_contact;
        }
      }
    }
    if (n_contact > 0) support_x = (support_x - state.root.x) / n_contact;

    // root vertical
    double az;
    if (supported) {
      if (!was_supported && state.root_vel.vz < -dyn::kImpactSpeed)
        state.root_vel.vz = -params.restitution * state.root_vel.vz;
      az = dyn::kSupportStiffness * (z_sup - state.root.z) - dyn::kSupportDamping * state.root_vel.vz;
    } else {
      az = -dyn::kGravity;
    }
    was_supported = supported;

    // root horizontal
    double ax;
    if (supported) {
      ax = (-dyn::kPaddleGain * params.friction_dynamic * paddle -
            params.friction_static * dyn::kContactDamping * state.root_vel.vx) /
           mass_scale;
    } else {
      ax = -dyn::kAirDragX * state.root_vel.vx;
    }

    // pitch: topple toward the center-of-mass offset, ankle restoring on contact
    double com_x = 0.0;
    for (const auto& b : body) com_x += b.pos.x;
    com_x /= static_cast<double>(body.size());
    com_x += rot(state.root.pitch, Vec2{params.com_offset[0], params.com_offset[2]}).x;
    const double tip = dyn::kTipGain * (com_x - (supported ? support_x : state.root.x));
    const double restore = supported
                               ? (-dyn::kPitchStiffness * state.root.pitch - dyn::kPitchDamping * state.root_vel.w)
                               : (-dyn::kAirDragPitch * state.root_vel.w);
    const double alpha = (tip + restore) / mass_scale;

    state.root_vel.vx = std::clamp(state.root_vel.vx + ax * h, -dyn::kRootVelLimit, dyn::kRootVelLimit);
    state.root_vel.vz = std::clamp(state.root_vel.vz + az * h, -dyn::kRootVelLimit, dyn::kRootVelLimit);
    state.root_vel.w = std::clamp(state.root_vel.w + alpha * h, -dyn::kRootAngVelLimit, dyn::kRootAngVelLimit);
    state.root.x += state.root_vel.vx * h;
    state.root.z += state.root_vel.vz * h;
    state.root.pitch += state.root_vel.w * h;
  }

  for (std::size_t j = 0; j < J; ++j) state.qdd[j] = (state.qd[j] - qd_before[j]) / robot.control_dt;
  const auto g = projected_gravity(state.root.pitch);
  state.g_proj = {g[0], g[1], g[2]};
  state.step += 1;
}

}  // namespace motrack::simenv
