// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "motrack/common.hpp"

namespace motrack::simenv {

// Planar world: X forward, Z up, rotations about the lateral Y axis (pitch).
// 3-vectors passed across module boundaries embed the plane as (x, 0, z),
// angular rates as (0, w, 0), so norms and formulas keep their 3-D shape.
struct Vec2 {
  double x = 0.0, z = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.z}; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.z * a.z); }

struct Pose2 {
  double x = 0.0, z = 0.0, pitch = 0.0;
};

struct Vel2 {
  double vx = 0.0, vz = 0.0, w = 0.0;  // w = pitch rate
};

/// body -> world rotation for pitch angle th
inline Vec2 rot(double th, Vec2 v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x + s * v.z, -s * v.x + c * v.z};
}

/// world -> body
inline Vec2 rot_inv(double th, Vec2 v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x - s * v.z, s * v.x + c * v.z};
}

/// d/dth of rot(th) applied to v
inline Vec2 rot_dot(double th, Vec2 v) {
  const double c = std::cos(th), s = std::sin(th);
  return {-s * v.x + c * v.z, -c * v.x - s * v.z};
}

/// Gravity direction expressed in the body frame; unit length by construction.
inline std::array<double, 3> projected_gravity(double pitch) {
  return {std::sin(pitch), 0.0, -std::cos(pitch)};
}

struct LinkDef {
  int joint = -1;     // index into q
  double length = 0;  // m
};

/// Serial 2-ish link chain hanging from a body-frame attach point. Joint
/// angles measure deviation from straight down, positive swings forward.
struct LimbDef {
  std::string name;
  Vec2 attach;  // body frame
  std::vector<LinkDef> links;
};

struct BodyDef {
  std::string name;
  int limb = -1;   // -1: fixed offset from the root
  int link = -1;   // index into limb links (body sits at the link end)
  Vec2 offset;     // used when limb == -1
};

struct RobotConfig {
  std::string name = "biped8";
  int num_joints = 0;
  std::vector<double> q0;            // default joint positions (rad)
  std::vector<double> action_scale;  // per-joint target scale s
  std::vector<double> kp, kd;        // PD gains
  std::vector<double> q_min, q_max;  // joint limits
  std::vector<LimbDef> limbs;
  std::vector<BodyDef> bodies;  // body 0 is always the pelvis/root

  std::vector<int> key_bodies;        // tracking set B
  std::vector<int> five_point;        // B5 analog (torso, hands, feet)
  std::vector<int> termination_set;   // B_z analog (pelvis, feet, hands)
  std::vector<int> end_effectors;     // contact-labelled bodies
  std::vector<int> allowed_contacts;  // subset of end_effectors ("feet")

  double control_dt = 0.02;  // 50 Hz
  int substeps = 4;
  double default_root_height = 0.0;  // derived so the lowest foot touches z=0

  int num_bodies() const { return static_cast<int>(bodies.size()); }
  int num_key() const { return static_cast<int>(key_bodies.size()); }
  int num_ee() const { return static_cast<int>(end_effectors.size()); }

  void validate() const;

  /// Two-leg, two-arm planar biped, 8 joints, 10 bodies.
  static RobotConfig biped8();
  /// Minimal two-limb robot used by the sinusoid-tracking smoke task.
  static RobotConfig minimal2();
};

struct BodyState {
  Vec2 pos;            // world
  double angle = 0.0;  // world pitch of the body
  Vec2 vel;            // world
  double ang_vel = 0.0;
};

/// Analytic forward kinematics + velocities for all bodies.
void forward_kinematics(const RobotConfig& robot, const Pose2& root, const Vel2& root_vel,
                        std::span<const double> q, std::span<const double> qd,
                        std::span<BodyState> out);

/// Body-frame positions only (root pose independent); used for support height.
void body_frame_positions(const RobotConfig& robot, std::span<const double> q, std::span<Vec2> out);

}  // namespace motrack::simenv
