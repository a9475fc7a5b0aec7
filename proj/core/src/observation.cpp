// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/observation.hpp"

#include <sstream>

namespace motrack::simenv {

void NoiseSpec::validate() const {
  for (double w : {gravity, ang_vel, joint_pos, joint_vel, ref_gravity, ref_lin_vel, ref_ang_vel,
                   ref_joint, ref_height}) {
    if (w < 0) fail("NoiseSpec: negative noise width");
  }
  if (prev_action != 0.0) fail("NoiseSpec: previous action carries no noise by contract");
}

ObsLayout ObsLayout::build(const RobotConfig& robot, int lookahead) {
  if (lookahead < 1) fail("ObsLayout: lookahead must be >= 1");
  const int J = robot.num_joints;
  const int H = lookahead;
  ObsLayout l;
  l.num_joints = J;
  l.lookahead = H;
  auto push = [&l](const std::string& name, int width) {
    l.groups.push_back({name, l.total, width});
    l.total += width;
  };
  push("gravity", 3);
  push("ang_vel", 3);
  push("joint_pos", J);
  push("joint_vel", J);
  push("prev_action", J);
  l.prop_dim = l.total;
  push("ref_gravity", 3 * H);
  push("ref_lin_vel", 3 * H);
  push("ref_ang_vel", 3 * H);
  push("ref_joint", J * H);
  push("ref_height", H);
  // privileged block: anchor pose difference (3), heading-aligned reference
  // root state (3 lin vel + 3 ang vel + height gap), exact key-body world
  // positions (3 per key body)
  l.priv_dim = 3 + 7 + 3 * robot.num_key();
  return l;
}

const ObsLayout::Group& ObsLayout::group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return g;
  fail("ObsLayout: unknown group '" + name + "'");
}

std::string ObsLayout::describe() const {
  std::ostringstream os;
  os << "obs_layout/v1 J=" << num_joints << " H=" << lookahead << " priv=" << priv_dim << ";";
  for (const auto& g : groups) os << g.name << "@" << g.offset << "+" << g.width << ";";
  return os.str();
}

std::uint64_t ObsLayout::hash() const { return fnv1a(describe()); }

namespace {

void add_noise(std::vector<double>& v, const ObsLayout::Group& g, double width, Rng& rng) {
  if (width == 0.0) return;
  for (int i = 0; i < g.width; ++i) v[static_cast<std::size_t>(g.offset + i)] += uniform(rng, -width, width);
}

}  // namespace

Observations build_observation(const EnvState& state, const motiondata::MotionClip& clip, int t,
                               const ObsLayout& layout, const NoiseSpec& noise,
                               const RobotConfig& robot, Rng& rng) {
  if (t >= clip.frames() || t < 0) fail("build_observation: clip exhausted at frame " + std::to_string(t));
  const int J = layout.num_joints;
  const int H = layout.lookahead;

  Observations obs;
  obs.clean.assign(static_cast<std::size_t>(layout.total), 0.0);
  auto* o = obs.clean.data();
  int at = 0;
  // proprioception, table order
  for (int i = 0; i < 3; ++i) o[at++] = state.g_proj[static_cast<std::size_t>(i)];
  o[at++] = 0.0;
  o[at++] = state.root_vel.w;
  o[at++] = 0.0;
  for (int j = 0; j < J; ++j) o[at++] = state.q[static_cast<std::size_t>(j)] - robot.q0[static_cast<std::size_t>(j)];
  for (int j = 0; j < J; ++j) o[at++] = state.qd[static_cast<std::size_t>(j)];
  for (int j = 0; j < J; ++j) o[at++] = state.prev_action[static_cast<std::size_t>(j)];
  // reference lookahead, group-major, frames t .. t+H-1 held at the clip end
  for (int h = 0; h < H; ++h) {
    const double* g = clip.gravity_frame(clip.held(t + h));
    o[at++] = g[0];
    o[at++] = g[1];
    o[at++] = g[2];
  }
  for (int h = 0; h < H; ++h) {
    const auto v = clip.vel(clip.held(t + h));
    o[at++] = v.vx;
    o[at++] = 0.0;
    o[at++] = v.vz;
  }
  for (int h = 0; h < H; ++h) {
    const auto v = clip.vel(clip.held(t + h));
    o[at++] = 0.0;
    o[at++] = v.w;
    o[at++] = 0.0;
  }
  for (int h = 0; h < H; ++h) {
    const double* q = clip.joint_frame(clip.held(t + h));
    for (int j = 0; j < J; ++j) o[at++] = q[j];
  }
  for (int h = 0; h < H; ++h) o[at++] = clip.root_height[static_cast<std::size_t>(clip.held(t + h))];
  if (at != layout.total) fail("build_observation: layout mismatch");

  // actor = clean + noise
  obs.actor = obs.clean;
  add_noise(obs.actor, layout.group("gravity"), noise.gravity, rng);
  add_noise(obs.actor, layout.group("ang_vel"), noise.ang_vel, rng);
  add_noise(obs.actor, layout.group("joint_pos"), noise.joint_pos, rng);
  add_noise(obs.actor, layout.group("joint_vel"), noise.joint_vel, rng);
  add_noise(obs.actor, layout.group("prev_action"), noise.prev_action, rng);
  add_noise(obs.actor, layout.group("ref_gravity"), noise.ref_gravity, rng);
  add_noise(obs.actor, layout.group("ref_lin_vel"), noise.ref_lin_vel, rng);
  add_noise(obs.actor, layout.group("ref_ang_vel"), noise.ref_ang_vel, rng);
  add_noise(obs.actor, layout.group("ref_joint"), noise.ref_joint, rng);
  add_noise(obs.actor, layout.group("ref_height"), noise.ref_height, rng);

  // critic = clean ++ privileged
  obs.critic = obs.clean;
  obs.critic.reserve(static_cast<std::size_t>(layout.critic_dim()));
  const auto ref_pose = clip.pose(t);
  const auto ref_vel = clip.vel(t);
  // anchor pose difference
  obs.critic.push_back(state.root.x - ref_pose.x);
  obs.critic.push_back(state.root.z - ref_pose.z);
  obs.critic.push_back(state.root.pitch - ref_pose.pitch);
  // heading-aligned reference root state: reference velocity in the robot frame
  const Vec2 v_body = rot_inv(state.root.pitch, {ref_vel.vx, ref_vel.vz});
  obs.critic.push_back(v_body.x);
  obs.critic.push_back(0.0);
  obs.critic.push_back(v_body.z);
  obs.critic.push_back(0.0);
  obs.critic.push_back(ref_vel.w);
  obs.critic.push_back(0.0);
  obs.critic.push_back(clip.root_height[static_cast<std::size_t>(t)] - state.root.z);
  // exact key-body world positions
  std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);
  for (int k : robot.key_bodies) {
    const auto& b = body[static_cast<std::size_t>(k)];
    obs.critic.push_back(b.pos.x);
    obs.critic.push_back(0.0);
    obs.critic.push_back(b.pos.z);
  }
  if (static_cast<int>(obs.critic.size()) != layout.critic_dim()) fail("build_observation: privileged layout mismatch");
  return obs;
}

AuxTargets build_aux_targets(const EnvState& state, const motiondata::MotionClip& clip, int t,
                             const RobotConfig& robot) {
  AuxTargets aux;
  aux.root_lin_vel = {state.root_vel.vx, 0.0, state.root_vel.vz};
  aux.contacts.assign(state.contact.begin(), state.contact.end());

  // reference key bodies relative to the reference root frame
  const auto ref_pose = clip.pose(clip.held(t));
  const double* ref_key = clip.key_frame(clip.held(t));
  aux.ref_keypos_rel.resize(static_cast<std::size_t>(robot.num_key()) * 3);
  for (int k = 0; k < robot.num_key(); ++k) {
    const Vec2 world{ref_key[3 * k + 0], ref_key[3 * k + 2]};
    const Vec2 rel = rot_inv(ref_pose.pitch, world - Vec2{ref_pose.x, ref_pose.z});
    aux.ref_keypos_rel[static_cast<std::size_t>(3 * k) + 0] = rel.x;
    aux.ref_keypos_rel[static_cast<std::size_t>(3 * k) + 1] = 0.0;
    aux.ref_keypos_rel[static_cast<std::size_t>(3 * k) + 2] = rel.z;
  }

  // robot key bodies relative to the robot root frame
  std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  forward_kinematics(robot, state.root, state.root_vel, state.q, state.qd, body);
  aux.robot_keypos_rel.resize(static_cast<std::size_t>(robot.num_key()) * 3);
  for (int k = 0; k < robot.num_key(); ++k) {
    const auto& b = body[static_cast<std::size_t>(robot.key_bodies[static_cast<std::size_t>(k)])];
    const Vec2 rel = rot_inv(state.root.pitch, b.pos - Vec2{state.root.x, state.root.z});
    aux.robot_keypos_rel[static_cast<std::size_t>(3 * k) + 0] = rel.x;
    aux.robot_keypos_rel[static_cast<std::size_t>(3 * k) + 1] = 0.0;
    aux.robot_keypos_rel[static_cast<std::size_t>(3 * k) + 2] = rel.z;
  }
  return aux;
}

}  // namespace motrack::simenv
