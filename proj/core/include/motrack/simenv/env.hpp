// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <memory>
#include <optional>

#include "motrack/simenv/dynamics.hpp"
#include "motrack/simenv/observation.hpp"
#include "motrack/simenv/reward.hpp"

namespace motrack::simenv {

/// Everything an environment instance needs besides the clip library.
struct EnvConfig {
  RobotConfig robot = RobotConfig::biped8();
  NoiseSpec noise;
  DomainRandSpec rand;
  RewardWeights reward;
  TerminationThresholds termination;
  int lookahead = 10;
  bool enable_noise = true;
  bool enable_push = true;
  // When off, only the clip horizon ends the episode; the first triggered
  // early-termination rule is still reported (evaluation protocol).
  bool enforce_early_termination = true;

  void validate() const;
};

struct StepResult {
  Observations obs;  // built at the post-step reference frame
  double reward = 0.0;
  std::map<std::string, double> reward_terms;
  bool done = false;
  std::optional<TerminationReason> reason;
};

class EnvInterface {
 public:
  virtual ~EnvInterface() = default;
  virtual Observations reset() = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual const ObsLayout& layout() const = 0;
  virtual int action_dim() const = 0;
  virtual AuxTargets aux_targets() const = 0;
};

/// Single-threaded, independently seeded tracking environment. One instance
/// per worker; the clip library is shared read-only.
class MotionEnv : public EnvInterface {
 public:
  MotionEnv(EnvConfig cfg, motiondata::ClipLibraryPtr clips, std::uint64_t seed);

  Observations reset() override;
  /// Deterministic reset for evaluation and tests; `randomize` applies the
  /// episode randomization and initial-state perturbation.
  Observations reset_to(int clip_index, int phase, bool randomize);
  StepResult step(std::span<const double> action) override;

  const ObsLayout& layout() const override { return layout_; }
  int action_dim() const override { return cfg_.robot.num_joints; }
  AuxTargets aux_targets() const override;

  /// Oracle hook: pins the dynamic state to the clip frame (used by replay
  /// tests and evaluation baselines).
  void set_state_from_clip(int frame);

  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  const EpisodeParams& episode_params() const { return params_; }
  const motiondata::MotionClip& active_clip() const;
  const EnvConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

 private:
  Observations observe();

  EnvConfig cfg_;
  motiondata::ClipLibraryPtr clips_;
  ObsLayout layout_;
  Rng rng_;
  EnvState state_;
  EpisodeParams params_;
  std::deque<std::vector<double>> action_history_;
  double push_countdown_s_ = 0.0;
  bool episode_open_ = false;
};

/// Thin owner of N independently seeded environments.
class VecEnv {
 public:
  VecEnv(const EnvConfig& cfg, motiondata::ClipLibraryPtr clips, int num_envs, std::uint64_t seed);

  int size() const { return static_cast<int>(envs_.size()); }
  MotionEnv& env(int i) { return *envs_[static_cast<std::size_t>(i)]; }
  const MotionEnv& env(int i) const { return *envs_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::unique_ptr<MotionEnv>> envs_;
};

}  // namespace motrack::simenv
