// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/motiondata/clip.hpp"

namespace motrack::motiondata {

/// Procedural clip families standing in for a motion corpus. Family tags act
/// as dataset sources for macro-averaged evaluation.
struct ProcGenSpec {
  simenv::RobotConfig robot = simenv::RobotConfig::biped8();
  double fps = 50.0;
  int clips_per_family = 4;
  double min_seconds = 3.0;
  double max_seconds = 5.0;
  double jitter_amplitude = 0.03;  // rad, per-frame uniform joint noise bound
  std::vector<std::string> families = {"stand", "sine", "spline", "crouch", "jitter"};

  void validate() const;
};

// Individual family builders; velocities are stored as forward differences of
// the generated positions, so finite-difference consistency holds exactly.
MotionClip make_stand_clip(const ProcGenSpec& spec, int index, Rng& rng);
MotionClip make_sine_clip(const ProcGenSpec& spec, int index, Rng& rng);
MotionClip make_spline_clip(const ProcGenSpec& spec, int index, Rng& rng);
MotionClip make_crouch_clip(const ProcGenSpec& spec, int index, Rng& rng);
/// Adds bounded per-frame joint noise to a base clip ("video-like" noise).
MotionClip make_jitter_clip(const ProcGenSpec& spec, const MotionClip& base, int index, Rng& rng);

/// Clip whose reference drives exactly one joint with a sinusoid; used by the
/// sinusoid-tracking smoke task.
MotionClip make_single_joint_sine_clip(const ProcGenSpec& spec, int joint, double amplitude,
                                       double frequency_hz, double seconds, int index);

ClipLibrary generate_procedural_clips(const ProcGenSpec& spec, Rng& rng);

}  // namespace motrack::motiondata
