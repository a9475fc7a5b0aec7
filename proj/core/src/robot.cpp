// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/robot.hpp"

#include <algorithm>

namespace motrack::simenv {

void RobotConfig::validate() const {
  if (num_joints < 2) fail("RobotConfig: need at least 2 joints");
  auto chk = [&](const std::vector<double>& v, const char* what) {
    if (static_cast<int>(v.size()) != num_joints) fail(std::string("RobotConfig: bad size for ") + what);
  };
  chk(q0, "q0");
  chk(action_scale, "action_scale");
  chk(kp, "kp");
  chk(kd, "kd");
  chk(q_min, "q_min");
  chk(q_max, "q_max");
  for (int j = 0; j < num_joints; ++j) {
    if (kp[j] <= 0 || kd[j] <= 0) fail("RobotConfig: PD gains must be positive");
    if (q_min[j] >= q_max[j]) fail("RobotConfig: joint limits inverted");
  }
  if (bodies.empty() || bodies[0].limb != -1) fail("RobotConfig: body 0 must be the root-attached pelvis");
  for (const auto& b : bodies) {
    if (b.limb >= static_cast<int>(limbs.size())) fail("RobotConfig: body references missing limb");
    if (b.limb >= 0 && (b.link < 0 || b.link >= static_cast<int>(limbs[b.limb].links.size())))
      fail("RobotConfig: body references missing link");
  }
  auto chk_ids = [&](const std::vector<int>& ids, const char* what) {
    for (int i : ids)
      if (i < 0 || i >= num_bodies()) fail(std::string("RobotConfig: body index out of range in ") + what);
  };
  chk_ids(key_bodies, "key_bodies");
  chk_ids(five_point, "five_point");
  chk_ids(termination_set, "termination_set");
  chk_ids(end_effectors, "end_effectors");
  chk_ids(allowed_contacts, "allowed_contacts");
  if (control_dt <= 0 || substeps < 1) fail("RobotConfig: bad control timing");
}

void body_frame_positions(const RobotConfig& robot, std::span<const double> q, std::span<Vec2> out) {
  for (int b = 0; b < robot.num_bodies(); ++b) {
    const BodyDef& def = robot.bodies[static_cast<std::size_t>(b)];
    if (def.limb < 0) {
      out[static_cast<std::size_t>(b)] = def.offset;
      continue;
    }
    const LimbDef& limb = robot.limbs[static_cast<std::size_t>(def.limb)];
    Vec2 p = limb.attach;
    double phi = 0.0;
    for (int l = 0; l <= def.link; ++l) {
      phi += q[static_cast<std::size_t>(limb.links[static_cast<std::size_t>(l)].joint)];
      const double len = limb.links[static_cast<std::size_t>(l)].length;
      p = p + Vec2{len * std::sin(phi), -len * std::cos(phi)};
    }
    out[static_cast<std::size_t>(b)] = p;
  }
}

void forward_kinematics(const RobotConfig& robot, const Pose2& root, const Vel2& root_vel,
                        std::span<const double> q, std::span<const double> qd,
                        std::span<BodyState> out) {
  const Vec2 rpos{root.x, root.z};
  const Vec2 rvel{root_vel.vx, root_vel.vz};
  for (int b = 0; b < robot.num_bodies(); ++b) {
    const BodyDef& def = robot.bodies[static_cast<std::size_t>(b)];
    Vec2 p_body, v_body;
    double rel_angle = 0.0, rel_rate = 0.0;
    if (def.limb < 0) {
      p_body = def.offset;
    } else {
      const LimbDef& limb = robot.limbs[static_cast<std::size_t>(def.limb)];
      Vec2 p = limb.attach;
      Vec2 v{0, 0};
      double phi = 0.0, phid = 0.0;
      for (int l = 0; l <= def.link; ++l) {
        const auto& ln = limb.links[static_cast<std::size_t>(l)];
        phi += q[static_cast<std::size_t>(ln.joint)];
        phid += qd[static_cast<std::size_t>(ln.joint)];
        p = p + Vec2{ln.length * std::sin(phi), -ln.length * std::cos(phi)};
        v = v + phid * Vec2{ln.length * std::cos(phi), ln.length * std::sin(phi)};
      }
      p_body = p;
      v_body = v;
      rel_angle = phi;
      rel_rate = phid;
    }
    BodyState& s = out[static_cast<std::size_t>(b)];
    s.pos = rpos + rot(root.pitch, p_body);
    s.vel = rvel + root_vel.w * rot_dot(root.pitch, p_body) + rot(root.pitch, v_body);
    s.angle = root.pitch + rel_angle;
    s.ang_vel = root_vel.w + rel_rate;
  }
}

RobotConfig RobotConfig::biped8() {
  RobotConfig r;
  r.name = "biped8";
  r.num_joints = 8;
  // joints: l_hip, l_knee, r_hip, r_knee, l_shoulder, l_elbow, r_shoulder, r_elbow
  r.q0 = {0.2, -0.4, 0.2, -0.4, 0.1, -0.2, 0.1, -0.2};
  r.action_scale.assign(8, 0.5);
  r.kp.assign(8, 40.0);
  r.kd.assign(8, 4.0);
  r.q_min.assign(8, -2.5);
  r.q_max.assign(8, 2.5);

  r.limbs = {
      LimbDef{"l_leg", {-0.05, 0.0}, {{0, 0.4}, {1, 0.4}}},
      LimbDef{"r_leg", {0.05, 0.0}, {{2, 0.4}, {3, 0.4}}},
      LimbDef{"l_arm", {-0.05, 0.4}, {{4, 0.3}, {5, 0.3}}},
      LimbDef{"r_arm", {0.05, 0.4}, {{6, 0.3}, {7, 0.3}}},
  };
  r.bodies = {
      BodyDef{"pelvis", -1, -1, {0.0, 0.0}},  BodyDef{"torso", -1, -1, {0.0, 0.3}},
      BodyDef{"l_knee", 0, 0, {}},            BodyDef{"l_foot", 0, 1, {}},
      BodyDef{"r_knee", 1, 0, {}},            BodyDef{"r_foot", 1, 1, {}},
      BodyDef{"l_elbow", 2, 0, {}},           BodyDef{"l_hand", 2, 1, {}},
      BodyDef{"r_elbow", 3, 0, {}},           BodyDef{"r_hand", 3, 1, {}},
  };
  r.key_bodies = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  r.five_point = {1, 7, 9, 3, 5};        // torso, hands, feet
  r.termination_set = {0, 3, 5, 7, 9};   // pelvis, feet, hands
  r.end_effectors = {3, 5, 7, 9};        // l_foot, r_foot, l_hand, r_hand
  r.allowed_contacts = {3, 5};           // feet

  // Default root height: lowest foot rests exactly on flat ground.
  std::vector<Vec2> pos(r.bodies.size());
  body_frame_positions(r, r.q0, pos);
  double low = 0.0;
  for (int ee : r.end_effectors) low = std::min(low, pos[static_cast<std::size_t>(ee)].z);
  r.default_root_height = -low;
  r.validate();
  return r;
}

RobotConfig RobotConfig::minimal2() {
  RobotConfig r;
  r.name = "minimal2";
  r.num_joints = 2;
  r.q0 = {0.0, 0.1};
  r.action_scale.assign(2, 0.5);
  r.kp.assign(2, 40.0);
  r.kd.assign(2, 4.0);
  r.q_min.assign(2, -2.5);
  r.q_max.assign(2, 2.5);
  r.limbs = {
      LimbDef{"leg", {0.0, 0.0}, {{0, 0.5}}},
      LimbDef{"arm", {0.0, 0.3}, {{1, 0.3}}},
  };
  r.bodies = {
      BodyDef{"pelvis", -1, -1, {0.0, 0.0}},
      BodyDef{"torso", -1, -1, {0.0, 0.25}},
      BodyDef{"foot", 0, 0, {}},
      BodyDef{"hand", 1, 0, {}},
  };
  r.key_bodies = {0, 1, 2, 3};
  r.five_point = {1, 2, 3};
  r.termination_set = {0, 2, 3};
  r.end_effectors = {2, 3};
  r.allowed_contacts = {2};

  std::vector<Vec2> pos(r.bodies.size());
  body_frame_positions(r, r.q0, pos);
  double low = 0.0;
  for (int ee : r.end_effectors) low = std::min(low, pos[static_cast<std::size_t>(ee)].z);
  r.default_root_height = -low;
  r.validate();
  return r;
}

}  // namespace motrack::simenv
