// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/reward.hpp"

#include <algorithm>
#include <cmath>

namespace motrack::simenv {

double velocity_ratio_error(const double* vp, const double* vg, int dim, double eps) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < dim; ++i) {
    num += (vp[i] - vg[i]) * (vp[i] - vg[i]);
    den += vg[i] * vg[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + eps);
}

double angle_distance(double a, double b) {
  double d = a - b;
  while (d > M_PI) d -= 2.0 * M_PI;
  while (d < -M_PI) d += 2.0 * M_PI;
  return d;
}

const char* termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::Gravity: return "gravity";
    case TerminationReason::KeyBodyHeight: return "key_body_height";
    case TerminationReason::PelvisDrift: return "pelvis_drift";
    case TerminationReason::MaxLength: return "max_length";
  }
  return "?";
}

namespace {

struct RefFrame {
  Pose2 pose;
  Vel2 vel;
  std::vector<BodyState> body;
};

RefFrame reference_frame(const motiondata::MotionClip& clip, int t, const RobotConfig& robot) {
  RefFrame r;
  const int f = clip.held(t);
  r.pose = clip.pose(f);
  r.vel = clip.vel(f);
  std::vector<double> qd;
  clip.joint_velocity(f, qd);
  r.body.resize(static_cast<std::size_t>(robot.num_bodies()));
  forward_kinematics(robot, r.pose, r.vel,
                     std::span<const double>(clip.joint_frame(f), static_cast<std::size_t>(clip.num_joints)),
                     qd, r.body);
  return r;
}

}  // namespace

RewardResult compute_reward(const EnvState& state, const motiondata::MotionClip& clip, int t,
                            std::span<const double> action, std::span<const double> prev_action,
                            const RewardWeights& w, const RobotConfig& robot) {
  std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);
  const RefFrame ref = reference_frame(clip, t, robot);

  const Vec2 root_p{state.root.x, state.root.z};
  const Vec2 root_g{ref.pose.x, ref.pose.z};

  RewardResult out;
  auto emit = [&out](const std::string& name, double weighted) {
    out.terms[name] = weighted;
    out.total += weighted;
  };

  emit("alive", w.alive * 1.0);

  // root-relative key-body tracking
  {
    double acc_pos = 0.0, acc_rot = 0.0, acc_lin = 0.0, acc_ang = 0.0;
    for (int k : robot.key_bodies) {
      const auto& bp = body[static_cast<std::size_t>(k)];
      const auto& bg = ref.body[static_cast<std::size_t>(k)];
      const Vec2 rel_p = rot_inv(state.root.pitch, bp.pos - root_p);
      const Vec2 rel_g = rot_inv(ref.pose.pitch, bg.pos - root_g);
      const Vec2 dp = rel_p - rel_g;
      acc_pos += (dp.x * dp.x + dp.z * dp.z) / (kSigmaKbPos * kSigmaKbPos);
      const double drot = angle_distance(bp.angle - state.root.pitch, bg.angle - ref.pose.pitch);
      acc_rot += drot * drot / (kSigmaKbRot * kSigmaKbRot);
      const Vec2 dv = bp.vel - bg.vel;
      acc_lin += (dv.x * dv.x + dv.z * dv.z) / (kSigmaKbLin * kSigmaKbLin);
      const double dw = bp.ang_vel - bg.ang_vel;
      acc_ang += dw * dw / (kSigmaKbAng * kSigmaKbAng);
    }
    const double nb = static_cast<double>(robot.key_bodies.size());
    emit("kb_pos", w.kb_pos * std::exp(-acc_pos / nb));
    emit("kb_rot", w.kb_rot * std::exp(-acc_rot / nb));
    emit("kb_lin", w.kb_lin * std::exp(-acc_lin / nb));
    emit("kb_ang", w.kb_ang * std::exp(-acc_ang / nb));
  }

  // root velocity ratio rewards
  {
    const double vp[3] = {state.root_vel.vx, 0.0, state.root_vel.vz};
    const double vg[3] = {ref.vel.vx, 0.0, ref.vel.vz};
    const double rho_lin = velocity_ratio_error(vp, vg, 3);
    emit("root_lin_ratio", w.root_lin_ratio * std::exp(-(rho_lin * rho_lin) / (kSigmaRootLin * kSigmaRootLin)));
    const double wp[3] = {0.0, state.root_vel.w, 0.0};
    const double wg[3] = {0.0, ref.vel.w, 0.0};
    const double rho_ang = velocity_ratio_error(wp, wg, 3);
    emit("root_ang_ratio", w.root_ang_ratio * std::exp(-(rho_ang * rho_ang) / (kSigmaRootAng * kSigmaRootAng)));
  }

  // local five-point objective
  {
    double acc = 0.0;
    for (int k : robot.five_point) {
      const auto& bp = body[static_cast<std::size_t>(k)];
      const auto& bg = ref.body[static_cast<std::size_t>(k)];
      const Vec2 lp = rot_inv(state.root.pitch, bp.pos - root_p);
      const Vec2 lg = rot_inv(ref.pose.pitch, bg.pos - root_g);
      const Vec2 d = lp - lg;
      acc += (d.x * d.x + d.z * d.z) / (kSigmaFivePoint * kSigmaFivePoint);
    }
    const double nb = static_cast<double>(robot.five_point.size());
    emit("five_point", w.five_point * std::exp(-acc / nb));
  }

  // penalties
  {
    double rate = 0.0;
    for (std::size_t j = 0; j < action.size(); ++j) {
      const double d = action[j] - prev_action[j];
      rate += d * d;
    }
    emit("action_rate", w.action_rate * rate);

    double acc = 0.0;
    for (double a : state.qdd) acc += a * a;
    emit("joint_acc", w.joint_acc * acc);

    int violations = 0;
    for (int j = 0; j < robot.num_joints; ++j) {
      const double qj = state.q[static_cast<std::size_t>(j)];
      if (qj < robot.q_min[static_cast<std::size_t>(j)] || qj > robot.q_max[static_cast<std::size_t>(j)])
        ++violations;
    }
    emit("joint_limit", w.joint_limit * violations);

    int undesired = 0;
    for (int e = 0; e < robot.num_ee(); ++e) {
      const int body_id = robot.end_effectors[static_cast<std::size_t>(e)];
      const bool allowed = std::find(robot.allowed_contacts.begin(), robot.allowed_contacts.end(), body_id) !=
                           robot.allowed_contacts.end();
      if (!allowed && state.contact_force[static_cast<std::size_t>(e)] > kContactForceThreshold) ++undesired;
    }
    emit("undesired_contact", w.undesired_contact * undesired);
  }

  return out;
}

std::optional<TerminationReason> check_termination(const EnvState& state,
                                                   const motiondata::MotionClip& clip, int t,
                                                   const TerminationThresholds& th,
                                                   const RobotConfig& robot) {
  const int f = clip.held(t);
  // 1. projected gravity deviation
  {
    const double* g = clip.gravity_frame(f);
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = state.g_proj[static_cast<std::size_t>(i)] - g[i];
      d2 += d * d;
    }
    if (std::sqrt(d2) > th.gravity) return TerminationReason::Gravity;
  }
  // 2. vertical key-body tracking error over the critical set
  {
    std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
    forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);
    const RefFrame ref = reference_frame(clip, f, robot);
    double worst = 0.0;
    for (int k : robot.termination_set) {
      worst = std::max(worst, std::fabs(body[static_cast<std::size_t>(k)].pos.z -
                                        ref.body[static_cast<std::size_t>(k)].pos.z));
    }
    if (worst > th.key_body_height) return TerminationReason::KeyBodyHeight;
    // 3. pelvis position drift
    const auto pose = clip.pose(f);
    const Vec2 d = Vec2{state.root.x, state.root.z} - Vec2{pose.x, pose.z};
    if (norm(d) > th.pelvis_drift) return TerminationReason::PelvisDrift;
  }
  // 4. natural horizon: the clip's last frame
  if (t >= clip.frames() - 1) return TerminationReason::MaxLength;
  return std::nullopt;
}

}  // namespace motrack::simenv
