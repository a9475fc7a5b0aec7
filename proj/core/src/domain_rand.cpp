// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/domain_rand.hpp"

namespace motrack::simenv {

EpisodeParams EpisodeParams::neutral(int num_joints) {
  EpisodeParams p;
  p.q0_offset.assign(static_cast<std::size_t>(num_joints), 0.0);
  p.init.dq.assign(static_cast<std::size_t>(num_joints), 0.0);
  return p;
}

EpisodeParams sample_episode_params(const DomainRandSpec& spec, int num_joints, Rng& rng) {
  if (!spec.enabled) return EpisodeParams::neutral(num_joints);
  EpisodeParams p;
  p.action_delay = static_cast<int>(uniform(rng, 0.0, spec.action_delay_max + 1.0));
  p.action_delay = std::min(p.action_delay, spec.action_delay_max);

  p.ground.cell = spec.terrain_cell;
  p.ground.origin = -10.0;
  p.ground.offsets.resize(static_cast<std::size_t>(20.0 / spec.terrain_cell));
  for (auto& h : p.ground.offsets) h = spec.terrain_height.sample(rng);

  p.friction_static = spec.friction_static.sample(rng);
  p.friction_dynamic = spec.friction_dynamic.sample(rng);
  p.restitution = spec.restitution.sample(rng);
  p.q0_offset.resize(static_cast<std::size_t>(num_joints));
  for (auto& v : p.q0_offset) v = spec.default_joint_offset.sample(rng);
  p.mass_offset = spec.mass_offset.sample(rng);
  p.com_offset = {spec.com_offset_x.sample(rng), spec.com_offset_y.sample(rng),
                  spec.com_offset_z.sample(rng)};
  p.kp_scale = spec.pd_gain_scale.sample(rng);
  p.kd_scale = spec.pd_gain_scale.sample(rng);

  p.init.dx = spec.init_pos_xy.sample(rng);
  p.init.dy = spec.init_pos_xy.sample(rng);
  p.init.dz = spec.init_pos_z.sample(rng);
  p.init.droll = spec.init_rot_rollpitch.sample(rng);
  p.init.dpitch = spec.init_rot_rollpitch.sample(rng);
  p.init.dyaw = spec.init_rot_yaw.sample(rng);
  p.init.dvx = spec.init_vel_xy.sample(rng);
  p.init.dvy = spec.init_vel_xy.sample(rng);
  p.init.dvz = spec.init_vel_z.sample(rng);
  p.init.dq.resize(static_cast<std::size_t>(num_joints));
  for (auto& v : p.init.dq) v = spec.init_joint.sample(rng);
  return p;
}

PushSample apply_push(EnvState& state, const DomainRandSpec& spec, Rng& rng) {
  PushSample s;
  s.vx = spec.push_vel_xy.sample(rng);
  s.vy = spec.push_vel_xy.sample(rng);
  s.vz = spec.push_vel_z.sample(rng);
  s.wroll = spec.push_ang_rollpitch.sample(rng);
  s.wpitch = spec.push_ang_rollpitch.sample(rng);
  s.wyaw = spec.push_ang_yaw.sample(rng);
  state.root_vel.vx += s.vx;
  state.root_vel.vz += s.vz;
  state.root_vel.w += s.wpitch;
  return s;
}

}  // namespace motrack::simenv
