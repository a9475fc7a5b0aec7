// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>

#include "motrack/motiondata/clip.hpp"
#include "motrack/simenv/state.hpp"

namespace motrack::simenv {

// Fixed tracking-kernel widths of the reward table.
inline constexpr double kSigmaKbPos = 0.3;
inline constexpr double kSigmaKbRot = 0.4;
inline constexpr double kSigmaKbLin = 1.0;
inline constexpr double kSigmaKbAng = 3.14;
inline constexpr double kSigmaRootLin = 1.0;
inline constexpr double kSigmaRootAng = 1.0;
inline constexpr double kSigmaFivePoint = 0.1;
inline constexpr double kVelRatioEps = 0.1;       // stabilizing constant of the ratio error
inline constexpr double kContactForceThreshold = 1.0;  // N analog for undesired contacts

struct RewardWeights {
  double alive = 0.1;
  double kb_pos = 1.0;
  double kb_rot = 1.0;
  double kb_lin = 1.0;
  double kb_ang = 1.0;
  double root_lin_ratio = 1.0;
  double root_ang_ratio = 1.0;
  double five_point = 2.0;
  double action_rate = -0.2;
  double joint_acc = -1e-6;
  double joint_limit = -10.0;
  double undesired_contact = -0.1;
};

struct RewardResult {
  double total = 0.0;
  std::map<std::string, double> terms;  // weighted contributions; sums to total
};

/// relative velocity error rho(v_p, v_g) = |v_p - v_g| / (|v_g| + eps)
double velocity_ratio_error(const double* vp, const double* vg, int dim, double eps = kVelRatioEps);

/// Wrapped planar angle distance in [-pi, pi]; the 2-D analog of the
/// quaternion key-body rotation distance.
double angle_distance(double a, double b);

/// Evaluates the full reward table for the state against clip frame t.
/// `action` is a_t, `prev_action` is a_{t-1}.
RewardResult compute_reward(const EnvState& state, const motiondata::MotionClip& clip, int t,
                            std::span<const double> action, std::span<const double> prev_action,
                            const RewardWeights& weights, const RobotConfig& robot);

enum class TerminationReason { Gravity, KeyBodyHeight, PelvisDrift, MaxLength };

const char* termination_name(TerminationReason r);

struct TerminationThresholds {
  double gravity = 0.8;       // |g_proj - g_proj_ref| >
  double key_body_height = 0.25;  // max vertical key error >
  double pelvis_drift = 0.25;     // |pelvis - pelvis_ref| >
};

/// First triggered rule in fixed order gravity -> height -> pelvis drift ->
/// max length; nullopt when the episode continues. All comparisons strict.
std::optional<TerminationReason> check_termination(const EnvState& state,
                                                   const motiondata::MotionClip& clip, int t,
                                                   const TerminationThresholds& th,
                                                   const RobotConfig& robot);

}  // namespace motrack::simenv
