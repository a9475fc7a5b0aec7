// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/motiondata/procgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace motrack::motiondata {

namespace {

constexpr double kContactTol = 0.01;  // m; end-effector counts as grounded below this height
constexpr double kTwoPi = 6.283185307179586;

// Trajectory sampler: fills a clip from per-frame (root pose, joints) given by
// `eval(t, pose, q)`. Velocities are forward differences; the last frame holds
// the previous value.
MotionClip build_from_kinematics(const ProcGenSpec& spec, const std::string& id,
                                 const std::string& source, int num_frames,
                                 const std::function<void(int, simenv::Pose2&, std::vector<double>&)>& eval) {
  const auto& robot = spec.robot;
  MotionClip c;
  c.id = id;
  c.source = source;
  c.fps = spec.fps;
  c.num_joints = robot.num_joints;
  c.num_key_bodies = robot.num_key();
  c.num_end_effectors = robot.num_ee();

  const auto F = static_cast<std::size_t>(num_frames);
  std::vector<simenv::Pose2> poses(F);
  std::vector<std::vector<double>> qs(F, std::vector<double>(static_cast<std::size_t>(robot.num_joints)));
  for (int f = 0; f < num_frames; ++f) eval(f, poses[static_cast<std::size_t>(f)], qs[static_cast<std::size_t>(f)]);

  c.root_pose.resize(F * 3);
  c.root_vel.resize(F * 3);
  c.joints.resize(F * static_cast<std::size_t>(robot.num_joints));
  c.key_pos.resize(F * static_cast<std::size_t>(robot.num_key()) * 3);
  c.proj_gravity.resize(F * 3);
  c.root_height.resize(F);
  c.contacts.resize(F * static_cast<std::size_t>(robot.num_ee()));

  const double dt = 1.0 / spec.fps;
  std::vector<double> qd(static_cast<std::size_t>(robot.num_joints));
  std::vector<simenv::BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  for (int f = 0; f < num_frames; ++f) {
    const auto sf = static_cast<std::size_t>(f);
    const int fn = std::min(f + 1, num_frames - 1);
    const int fp = fn == f ? f - 1 : f;  // last frame repeats the previous delta
    const auto& p0 = poses[static_cast<std::size_t>(fp)];
    const auto& p1 = poses[static_cast<std::size_t>(fn)];
    simenv::Vel2 v{(p1.x - p0.x) / dt, (p1.z - p0.z) / dt, (p1.pitch - p0.pitch) / dt};
    for (int j = 0; j < robot.num_joints; ++j) {
      qd[static_cast<std::size_t>(j)] =
          (qs[static_cast<std::size_t>(fn)][static_cast<std::size_t>(j)] -
           qs[static_cast<std::size_t>(fp)][static_cast<std::size_t>(j)]) / dt;
    }
    const auto& pose = poses[sf];
    c.root_pose[3 * sf + 0] = pose.x;
    c.root_pose[3 * sf + 1] = pose.z;
    c.root_pose[3 * sf + 2] = pose.pitch;
    c.root_vel[3 * sf + 0] = v.vx;
    c.root_vel[3 * sf + 1] = v.vz;
    c.root_vel[3 * sf + 2] = v.w;
    std::copy(qs[sf].begin(), qs[sf].end(), c.joints.begin() + sf * static_cast<std::size_t>(robot.num_joints));

    simenv::forward_kinematics(robot, pose, v, qs[sf], qd, body);
    for (int k = 0; k < robot.num_key(); ++k) {
      const auto& b = body[static_cast<std::size_t>(robot.key_bodies[static_cast<std::size_t>(k)])];
      const std::size_t off = (sf * static_cast<std::size_t>(robot.num_key()) + static_cast<std::size_t>(k)) * 3;
      c.key_pos[off + 0] = b.pos.x;
      c.key_pos[off + 1] = 0.0;
      c.key_pos[off + 2] = b.pos.z;
    }
    const auto g = simenv::projected_gravity(pose.pitch);
    c.proj_gravity[3 * sf + 0] = g[0];
    c.proj_gravity[3 * sf + 1] = g[1];
    c.proj_gravity[3 * sf + 2] = g[2];
    c.root_height[sf] = pose.z;
    for (int e = 0; e < robot.num_ee(); ++e) {
      const auto& b = body[static_cast<std::size_t>(robot.end_effectors[static_cast<std::size_t>(e)])];
      c.contacts[sf * static_cast<std::size_t>(robot.num_ee()) + static_cast<std::size_t>(e)] =
          b.pos.z <= kContactTol ? 1 : 0;
    }
  }
  return c;
}

int sample_frames(const ProcGenSpec& spec, Rng& rng) {
  const double secs = uniform(rng, spec.min_seconds, spec.max_seconds);
  return std::max(16, static_cast<int>(secs * spec.fps));
}

double support_height(const simenv::RobotConfig& robot, std::span<const double> q,
                      std::vector<simenv::Vec2>& scratch) {
  simenv::body_frame_positions(robot, q, scratch);
  double low = 0.0;
  for (int ee : robot.allowed_contacts) low = std::min(low, scratch[static_cast<std::size_t>(ee)].z);
  return -low;
}

}  // namespace

void ProcGenSpec::validate() const {
  robot.validate();
  if (fps <= 0) fail("ProcGenSpec: fps must be positive");
  if (clips_per_family < 1) fail("ProcGenSpec: clips_per_family must be >= 1");
  if (min_seconds <= 0 || max_seconds < min_seconds) fail("ProcGenSpec: bad duration range");
  if (jitter_amplitude < 0) fail("ProcGenSpec: negative jitter amplitude");
  for (const auto& f : families) {
    if (f != "stand" && f != "sine" && f != "spline" && f != "crouch" && f != "jitter")
      fail("ProcGenSpec: unknown family '" + f + "'");
  }
}

MotionClip make_stand_clip(const ProcGenSpec& spec, int index, Rng& rng) {
  const int frames = sample_frames(spec, rng);
  const auto& robot = spec.robot;
  return build_from_kinematics(spec, "stand_" + std::to_string(index), "stand", frames,
                               [&](int, simenv::Pose2& pose, std::vector<double>& q) {
                                 q.assign(robot.q0.begin(), robot.q0.end());
                                 pose = {0.0, robot.default_root_height, 0.0};
                               });
}

MotionClip make_sine_clip(const ProcGenSpec& spec, int index, Rng& rng) {
  const int frames = sample_frames(spec, rng);
  const auto& robot = spec.robot;
  const auto J = static_cast<std::size_t>(robot.num_joints);
  std::vector<double> amp(J), freq(J), phase(J);
  // Legs stay subtle so the feet remain near the ground; arms swing wide.
  for (std::size_t j = 0; j < J; ++j) {
    const bool leg_joint = [&] {
      for (int lb : robot.allowed_contacts) {
        const auto& body = robot.bodies[static_cast<std::size_t>(lb)];
        for (const auto& ln : robot.limbs[static_cast<std::size_t>(body.limb)].links)
          if (ln.joint == static_cast<int>(j)) return true;
      }
      return false;
    }();
    amp[j] = leg_joint ? uniform(rng, 0.03, 0.12) : uniform(rng, 0.15, 0.45);
    freq[j] = uniform(rng, 0.3, 0.9);
    phase[j] = uniform(rng, 0.0, kTwoPi);
  }
  const double sway_amp = uniform(rng, 0.0, 0.04);
  const double sway_freq = uniform(rng, 0.2, 0.5);
  std::vector<simenv::Vec2> scratch(static_cast<std::size_t>(robot.num_bodies()));
  return build_from_kinematics(
      spec, "sine_" + std::to_string(index), "sine", frames,
      [&, sway_amp, sway_freq](int f, simenv::Pose2& pose, std::vector<double>& q) {
        const double t = f / spec.fps;
        for (std::size_t j = 0; j < J; ++j)
          q[j] = robot.q0[j] + amp[j] * std::sin(kTwoPi * freq[j] * t + phase[j]);
        pose.x = sway_amp * std::sin(kTwoPi * sway_freq * t);
        pose.z = support_height(robot, q, scratch);
        pose.pitch = 0.02 * std::sin(kTwoPi * sway_freq * t);
      });
}

MotionClip make_spline_clip(const ProcGenSpec& spec, int index, Rng& rng) {
  const int frames = sample_frames(spec, rng);
  const auto& robot = spec.robot;
  const auto J = static_cast<std::size_t>(robot.num_joints);
  // Smooth root path from a pair of sine harmonics, bounded speed.
  const double a1 = uniform(rng, 0.1, 0.35), f1 = uniform(rng, 0.1, 0.3);
  const double a2 = uniform(rng, 0.02, 0.1), f2 = uniform(rng, 0.4, 0.8);
  const double gait_freq = uniform(rng, 0.5, 1.0);
  std::vector<double> swing(J);
  for (std::size_t j = 0; j < J; ++j) swing[j] = uniform(rng, 0.05, 0.2);
  std::vector<simenv::Vec2> scratch(static_cast<std::size_t>(robot.num_bodies()));
  return build_from_kinematics(
      spec, "spline_" + std::to_string(index), "spline", frames,
      [&](int f, simenv::Pose2& pose, std::vector<double>& q) {
        const double t = f / spec.fps;
        for (std::size_t j = 0; j < J; ++j) {
          const double side = (j % 2 == 0) ? 1.0 : -1.0;
          q[j] = robot.q0[j] + side * swing[j] * std::sin(kTwoPi * gait_freq * t);
        }
        pose.x = a1 * std::sin(kTwoPi * f1 * t) + a2 * std::sin(kTwoPi * f2 * t);
        pose.z = support_height(robot, q, scratch);
        const double vx = kTwoPi * (a1 * f1 * std::cos(kTwoPi * f1 * t) + a2 * f2 * std::cos(kTwoPi * f2 * t));
        pose.pitch = std::clamp(0.1 * vx, -0.08, 0.08);
      });
}

MotionClip make_crouch_clip(const ProcGenSpec& spec, int index, Rng& rng) {
  const int frames = sample_frames(spec, rng);
  const auto& robot = spec.robot;
  const auto J = static_cast<std::size_t>(robot.num_joints);
  const double depth = uniform(rng, 0.15, 0.4);  // rad of extra leg bend
  const double period = uniform(rng, 2.0, 4.0);
  std::vector<simenv::Vec2> scratch(static_cast<std::size_t>(robot.num_bodies()));
  // Leg joints bend together (hip forward, knee back) for a squat-like dip.
  std::vector<double> bend_sign(J, 0.0);
  for (int lb : robot.allowed_contacts) {
    const auto& body = robot.bodies[static_cast<std::size_t>(lb)];
    const auto& links = robot.limbs[static_cast<std::size_t>(body.limb)].links;
    for (std::size_t l = 0; l < links.size(); ++l)
      bend_sign[static_cast<std::size_t>(links[l].joint)] = (l % 2 == 0) ? 1.0 : -2.0;
  }
  return build_from_kinematics(
      spec, "crouch_" + std::to_string(index), "crouch", frames,
      [&](int f, simenv::Pose2& pose, std::vector<double>& q) {
        const double t = f / spec.fps;
        const double b = depth * 0.5 * (1.0 - std::cos(kTwoPi * t / period));
        for (std::size_t j = 0; j < J; ++j) q[j] = robot.q0[j] + bend_sign[j] * b;
        pose.x = 0.0;
        pose.z = support_height(robot, q, scratch);
        pose.pitch = 0.0;
      });
}

MotionClip make_jitter_clip(const ProcGenSpec& spec, const MotionClip& base, int index, Rng& rng) {
  const auto& robot = spec.robot;
  const int frames = base.frames();
  std::vector<std::vector<double>> q(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    const double* bq = base.joint_frame(f);
    auto& qf = q[static_cast<std::size_t>(f)];
    qf.assign(bq, bq + robot.num_joints);
    for (auto& v : qf) v += uniform(rng, -spec.jitter_amplitude, spec.jitter_amplitude);
  }
  return build_from_kinematics(spec, "jitter_" + std::to_string(index), "jitter", frames,
                               [&](int f, simenv::Pose2& pose, std::vector<double>& out) {
                                 pose = base.pose(f);
                                 out = q[static_cast<std::size_t>(f)];
                               });
}

MotionClip make_single_joint_sine_clip(const ProcGenSpec& spec, int joint, double amplitude,
                                       double frequency_hz, double seconds, int index) {
  const auto& robot = spec.robot;
  if (joint < 0 || joint >= robot.num_joints) fail("make_single_joint_sine_clip: bad joint");
  const int frames = std::max(16, static_cast<int>(seconds * spec.fps));
  return build_from_kinematics(
      spec, "sine1j_" + std::to_string(index), "sine1j", frames,
      [&](int f, simenv::Pose2& pose, std::vector<double>& q) {
        const double t = f / spec.fps;
        q.assign(robot.q0.begin(), robot.q0.end());
        q[static_cast<std::size_t>(joint)] += amplitude * std::sin(kTwoPi * frequency_hz * t);
        pose = {0.0, robot.default_root_height, 0.0};
      });
}

ClipLibrary generate_procedural_clips(const ProcGenSpec& spec, Rng& rng) {
  spec.validate();
  ClipLibrary lib;
  const std::uint64_t master = rng();
  int family_id = 0;
  for (const auto& fam : spec.families) {
    for (int i = 0; i < spec.clips_per_family; ++i) {
      Rng sub(derive_seed(master, static_cast<std::uint64_t>(family_id), static_cast<std::uint64_t>(i)));
      if (fam == "stand") {
        lib.add(make_stand_clip(spec, i, sub));
      } else if (fam == "sine") {
        lib.add(make_sine_clip(spec, i, sub));
      } else if (fam == "spline") {
        lib.add(make_spline_clip(spec, i, sub));
      } else if (fam == "crouch") {
        lib.add(make_crouch_clip(spec, i, sub));
      } else {
        MotionClip base = make_sine_clip(spec, i, sub);
        lib.add(make_jitter_clip(spec, base, i, sub));
      }
    }
    ++family_id;
  }
  return lib;
}

}  // namespace motrack::motiondata
