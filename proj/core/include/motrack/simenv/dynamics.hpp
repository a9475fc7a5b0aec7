// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/simenv/domain_rand.hpp"

namespace motrack::simenv {

// Toy floating-base model:
//   - joints are unit-inertia double integrators driven by PD torque,
//     integrated semi-implicitly with `substeps` per control step;
//   - the root is held up by a spring-damper at the leg-extension support
//     height whenever a foot touches the ground, and is ballistic otherwise;
//   - horizontal motion comes from a contact paddle force (feet sweeping
//     backward while grounded push the base forward, scaled by the dynamic
//     friction draw) plus contact damping scaled by static friction;
//   - pitch feels a topple torque proportional to the center-of-mass offset
//     from the support point, restored by an ankle spring while grounded;
//   - restitution bounces the vertical landing velocity.
namespace dyn {
inline constexpr double kGravity = 9.81;
inline constexpr double kTrunkMass = 5.0;  // kg, nominal; mass offsets scale accelerations
inline constexpr double kTorqueLimit = 200.0;
inline constexpr double kJointVelLimit = 50.0;
inline constexpr double kSupportStiffness = 400.0;
inline constexpr double kSupportDamping = 40.0;
inline constexpr double kPitchStiffness = 100.0;
inline constexpr double kPitchDamping = 20.0;
inline constexpr double kTipGain = 30.0;
inline constexpr double kPaddleGain = 8.0;
inline constexpr double kContactDamping = 2.0;
inline constexpr double kAirDragX = 0.2;
inline constexpr double kAirDragPitch = 1.0;
inline constexpr double kContactStiffness = 1000.0;  // N/m penetration spring
inline constexpr double kImpactSpeed = 0.5;          // m/s; slower landings do not bounce
inline constexpr double kRootVelLimit = 10.0;
inline constexpr double kRootAngVelLimit = 20.0;
}  // namespace dyn

/// q_tar = (q0 + episode offset) + s .* a
void action_to_target(const RobotConfig& robot, const EpisodeParams& params,
                      std::span<const double> action, std::span<double> q_tar);

/// tau = kp_scaled .* (q_tar - q) - kd_scaled .* qd, clamped to the torque limit
void pd_torque(const RobotConfig& robot, const EpisodeParams& params, std::span<const double> q_tar,
               std::span<const double> q, std::span<const double> qd, std::span<double> tau);

/// Advances the state by one control step under the given (already delayed)
/// action. Throws on non-finite or wrongly sized actions.
void apply_action(EnvState& state, std::span<const double> action, const RobotConfig& robot,
                  const EpisodeParams& params);

}  // namespace motrack::simenv
