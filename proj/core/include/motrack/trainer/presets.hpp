// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/motiondata/procgen.hpp"
#include "motrack/simenv/env.hpp"

namespace motrack::trainer {

/// Single-joint sinusoid tracking task on the minimal two-joint robot: the
/// reference drives the arm joint with a sinusoid while the leg holds stance.
/// Noise, randomization and pushes are off; this is the learning smoke task.
struct SineTrackSetup {
  simenv::EnvConfig env;
  motiondata::ClipLibrary train;
  motiondata::ClipLibrary heldout;
};

inline SineTrackSetup make_sine_track_setup() {
  SineTrackSetup s;
  s.env.robot = simenv::RobotConfig::minimal2();
  s.env.enable_noise = false;
  s.env.enable_push = false;
  s.env.rand.enabled = false;

  motiondata::ProcGenSpec spec;
  spec.robot = s.env.robot;
  const int arm_joint = 1;
  const double amplitude = 0.5;
  int idx = 0;
  for (double freq : {0.35, 0.45, 0.55, 0.65})
    s.train.add(motiondata::make_single_joint_sine_clip(spec, arm_joint, amplitude, freq, 4.0, idx++));
  for (double freq : {0.4, 0.5, 0.6})
    s.heldout.add(motiondata::make_single_joint_sine_clip(spec, arm_joint, amplitude, freq, 4.0, idx++));
  return s;
}

}  // namespace motrack::trainer
