// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/env.hpp"

#include <algorithm>
#include <cmath>

namespace motrack::simenv {

void EnvConfig::validate() const {
  robot.validate();
  noise.validate();
  if (lookahead < 1) fail("EnvConfig: lookahead must be >= 1");
  if (termination.gravity <= 0 || termination.key_body_height <= 0 || termination.pelvis_drift <= 0)
    fail("EnvConfig: termination thresholds must be positive");
}

MotionEnv::MotionEnv(EnvConfig cfg, motiondata::ClipLibraryPtr clips, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      clips_(std::move(clips)),
      layout_(ObsLayout::build(cfg_.robot, cfg_.lookahead)),
      rng_(seed) {
  cfg_.validate();
  if (!clips_ || clips_->size() == 0) fail("MotionEnv: empty clip library");
  clips_->validate(cfg_.lookahead + 2);
  for (int i = 0; i < clips_->size(); ++i) {
    const auto& c = clips_->clip(i);
    if (c.num_joints != cfg_.robot.num_joints || c.num_key_bodies != cfg_.robot.num_key() ||
        c.num_end_effectors != cfg_.robot.num_ee())
      fail("MotionEnv: clip '" + c.id + "' does not match the robot");
    if (std::fabs(c.fps * cfg_.robot.control_dt - 1.0) > 1e-9)
      fail("MotionEnv: clip '" + c.id + "' frame rate must equal the control rate");
  }
  state_.init(cfg_.robot.num_joints, cfg_.robot.num_ee());
  params_ = EpisodeParams::neutral(cfg_.robot.num_joints);
}

const motiondata::MotionClip& MotionEnv::active_clip() const {
  if (state_.clip_index < 0) fail("MotionEnv: no active clip; call reset()");
  return clips_->clip(state_.clip_index);
}

void MotionEnv::set_state_from_clip(int frame) {
  const auto& clip = active_clip();
  if (frame < 0 || frame >= clip.frames()) fail("set_state_from_clip: frame out of range");
  const auto pose = clip.pose(frame);
  const auto vel = clip.vel(frame);
  state_.root = pose;
  state_.root_vel = vel;
  const double* q = clip.joint_frame(frame);
  std::copy(q, q + clip.num_joints, state_.q.begin());
  clip.joint_velocity(frame, state_.qd);
  std::fill(state_.qdd.begin(), state_.qdd.end(), 0.0);
  // action that holds this pose, so a_t = a_{t-1} at perfect tracking
  for (int j = 0; j < cfg_.robot.num_joints; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    state_.prev_action[sj] =
        (state_.q[sj] - cfg_.robot.q0[sj] - params_.q0_offset[sj]) / cfg_.robot.action_scale[sj];
  }
  const auto g = projected_gravity(pose.pitch);
  state_.g_proj = {g[0], g[1], g[2]};
  state_.phase = frame;
  // contact flags from kinematics against the episode ground
  std::vector<BodyState> body(static_cast<std::size_t>(cfg_.robot.num_bodies()));
  forward_kinematics(cfg_.robot, state_.root, state_.root_vel, state_.q, state_.qd, body);
  for (int e = 0; e < cfg_.robot.num_ee(); ++e) {
    const auto& b = body[static_cast<std::size_t>(cfg_.robot.end_effectors[static_cast<std::size_t>(e)])];
    const double pen = params_.ground.height_at(b.pos.x) - b.pos.z;
    state_.contact[static_cast<std::size_t>(e)] = pen >= 0.0 ? 1 : 0;
    state_.contact_force[static_cast<std::size_t>(e)] = std::max(0.0, pen) * dyn::kContactStiffness;
  }
}

Observations MotionEnv::observe() {
  const NoiseSpec& noise = cfg_.enable_noise ? cfg_.noise : NoiseSpec::disabled();
  return build_observation(state_, active_clip(), state_.phase, layout_, noise, cfg_.robot, rng_);
}

AuxTargets MotionEnv::aux_targets() const {
  return build_aux_targets(state_, active_clip(), state_.phase, cfg_.robot);
}

Observations MotionEnv::reset() {
  const int clip_index = clips_->sample(rng_);
  const int frames = clips_->clip(clip_index).frames();
  const int phase = static_cast<int>(uniform(rng_, 0.0, static_cast<double>(frames - 1)));
  return reset_to(clip_index, std::min(phase, frames - 2), cfg_.rand.enabled);
}

Observations MotionEnv::reset_to(int clip_index, int phase, bool randomize) {
  if (clip_index < 0 || clip_index >= clips_->size()) fail("reset_to: clip index out of range");
  state_.init(cfg_.robot.num_joints, cfg_.robot.num_ee());
  state_.clip_index = clip_index;
  params_ = randomize ? sample_episode_params(cfg_.rand, cfg_.robot.num_joints, rng_)
                      : EpisodeParams::neutral(cfg_.robot.num_joints);
  set_state_from_clip(phase);
  if (randomize) {
    state_.root.x += params_.init.dx;
    state_.root.z += params_.init.dz;
    state_.root.pitch += params_.init.dpitch;
    state_.root_vel.vx += params_.init.dvx;
    state_.root_vel.vz += params_.init.dvz;
    for (std::size_t j = 0; j < state_.q.size(); ++j) state_.q[j] += params_.init.dq[j];
    const auto g = projected_gravity(state_.root.pitch);
    state_.g_proj = {g[0], g[1], g[2]};
  }
  action_history_.clear();
  push_countdown_s_ = cfg_.rand.push_interval_s.sample(rng_);
  episode_open_ = true;
  return observe();
}

StepResult MotionEnv::step(std::span<const double> action) {
  if (!episode_open_) fail("MotionEnv::step: episode finished or not started; call reset()");
  const auto& clip = active_clip();
  if (state_.phase + 1 >= clip.frames() + 1) fail("MotionEnv::step: clip exhausted");

  const auto J = static_cast<std::size_t>(cfg_.robot.num_joints);
  if (action.size() != J) fail("MotionEnv::step: action size mismatch");

  // periodic pushes
  if (cfg_.enable_push && cfg_.rand.enabled) {
    push_countdown_s_ -= cfg_.robot.control_dt;
    if (push_countdown_s_ <= 0.0) {
      apply_push(state_, cfg_.rand, rng_);
      push_countdown_s_ += cfg_.rand.push_interval_s.sample(rng_);
    }
  }

  // action delay queue: the executed command is the one issued `delay` steps ago
  action_history_.emplace_back(action.begin(), action.end());
  std::vector<double> effective(J, 0.0);
  const auto delay = static_cast<std::size_t>(params_.action_delay);
  if (action_history_.size() > delay)
    effective = action_history_[action_history_.size() - 1 - delay];
  while (action_history_.size() > delay + 1) action_history_.pop_front();

  apply_action(state_, effective, cfg_.robot, params_);
  state_.phase += 1;

  StepResult out;
  const RewardResult rr =
      compute_reward(state_, clip, state_.phase, action, state_.prev_action, cfg_.reward, cfg_.robot);
  out.reward = rr.total;
  out.reward_terms = rr.terms;
  std::copy(action.begin(), action.end(), state_.prev_action.begin());

  out.reason = check_termination(state_, clip, state_.phase, cfg_.termination, cfg_.robot);
  out.done = out.reason.has_value() &&
             (cfg_.enforce_early_termination || *out.reason == TerminationReason::MaxLength);
  if (out.done) episode_open_ = false;
  out.obs = observe();
  return out;
}

VecEnv::VecEnv(const EnvConfig& cfg, motiondata::ClipLibraryPtr clips, int num_envs, std::uint64_t seed) {
  if (num_envs < 1) fail("VecEnv: need at least one environment");
  envs_.reserve(static_cast<std::size_t>(num_envs));
  for (int i = 0; i < num_envs; ++i)
    envs_.push_back(std::make_unique<MotionEnv>(cfg, clips, derive_seed(seed, static_cast<std::uint64_t>(i))));
}

}  // namespace motrack::simenv
