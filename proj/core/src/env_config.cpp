// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/simenv/env_config.hpp"

#include <fstream>

namespace motrack::simenv {

using nlohmann::json;

namespace {

json range_to_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) fail("env config: range must be [lo, hi]");
  return Range{j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_range(const json& j, const char* key, Range& out) {
  if (j.contains(key)) out = range_from_json(j.at(key));
}

}  // namespace

json env_config_to_json(const EnvConfig& cfg) {
  json j;
  j["robot"] = {{"preset", cfg.robot.name},
                {"kp", cfg.robot.kp},
                {"kd", cfg.robot.kd},
                {"action_scale", cfg.robot.action_scale},
                {"control_dt", cfg.robot.control_dt},
                {"substeps", cfg.robot.substeps}};
  j["noise"] = {{"gravity", cfg.noise.gravity},       {"ang_vel", cfg.noise.ang_vel},
                {"joint_pos", cfg.noise.joint_pos},   {"joint_vel", cfg.noise.joint_vel},
                {"ref_gravity", cfg.noise.ref_gravity}, {"ref_lin_vel", cfg.noise.ref_lin_vel},
                {"ref_ang_vel", cfg.noise.ref_ang_vel}, {"ref_joint", cfg.noise.ref_joint},
                {"ref_height", cfg.noise.ref_height}};
  const auto& r = cfg.rand;
  j["randomization"] = {{"enabled", r.enabled},
                        {"action_delay_max", r.action_delay_max},
                        {"terrain_height", range_to_json(r.terrain_height)},
                        {"terrain_cell", r.terrain_cell},
                        {"friction_static", range_to_json(r.friction_static)},
                        {"friction_dynamic", range_to_json(r.friction_dynamic)},
                        {"restitution", range_to_json(r.restitution)},
                        {"default_joint_offset", range_to_json(r.default_joint_offset)},
                        {"mass_offset", range_to_json(r.mass_offset)},
                        {"com_offset_x", range_to_json(r.com_offset_x)},
                        {"com_offset_y", range_to_json(r.com_offset_y)},
                        {"com_offset_z", range_to_json(r.com_offset_z)},
                        {"pd_gain_scale", range_to_json(r.pd_gain_scale)},
                        {"init_pos_xy", range_to_json(r.init_pos_xy)},
                        {"init_pos_z", range_to_json(r.init_pos_z)},
                        {"init_rot_rollpitch", range_to_json(r.init_rot_rollpitch)},
                        {"init_rot_yaw", range_to_json(r.init_rot_yaw)},
                        {"init_vel_xy", range_to_json(r.init_vel_xy)},
                        {"init_vel_z", range_to_json(r.init_vel_z)},
                        {"init_joint", range_to_json(r.init_joint)},
                        {"push_interval_s", range_to_json(r.push_interval_s)},
                        {"push_vel_xy", range_to_json(r.push_vel_xy)},
                        {"push_vel_z", range_to_json(r.push_vel_z)},
                        {"push_ang_rollpitch", range_to_json(r.push_ang_rollpitch)},
                        {"push_ang_yaw", range_to_json(r.push_ang_yaw)}};
  const auto& w = cfg.reward;
  j["reward"] = {{"alive", w.alive},
                 {"kb_pos", w.kb_pos},
                 {"kb_rot", w.kb_rot},
                 {"kb_lin", w.kb_lin},
                 {"kb_ang", w.kb_ang},
                 {"root_lin_ratio", w.root_lin_ratio},
                 {"root_ang_ratio", w.root_ang_ratio},
                 {"five_point", w.five_point},
                 {"action_rate", w.action_rate},
                 {"joint_acc", w.joint_acc},
                 {"joint_limit", w.joint_limit},
                 {"undesired_contact", w.undesired_contact}};
  j["termination"] = {{"gravity", cfg.termination.gravity},
                      {"key_body_height", cfg.termination.key_body_height},
                      {"pelvis_drift", cfg.termination.pelvis_drift}};
  j["lookahead"] = cfg.lookahead;
  j["enable_noise"] = cfg.enable_noise;
  j["enable_push"] = cfg.enable_push;
  j["enforce_early_termination"] = cfg.enforce_early_termination;
  return j;
}

EnvConfig env_config_from_json(const json& j) {
  EnvConfig cfg;
  if (j.contains("robot")) {
    const auto& rj = j.at("robot");
    std::string preset = "biped8";
    maybe(rj, "preset", preset);
    if (preset == "biped8") cfg.robot = RobotConfig::biped8();
    else if (preset == "minimal2") cfg.robot = RobotConfig::minimal2();
    else fail("env config: unknown robot preset '" + preset + "'");
    maybe(rj, "kp", cfg.robot.kp);
    maybe(rj, "kd", cfg.robot.kd);
    maybe(rj, "action_scale", cfg.robot.action_scale);
    maybe(rj, "control_dt", cfg.robot.control_dt);
    maybe(rj, "substeps", cfg.robot.substeps);
  }
  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    maybe(nj, "gravity", cfg.noise.gravity);
    maybe(nj, "ang_vel", cfg.noise.ang_vel);
    maybe(nj, "joint_pos", cfg.noise.joint_pos);
    maybe(nj, "joint_vel", cfg.noise.joint_vel);
    maybe(nj, "ref_gravity", cfg.noise.ref_gravity);
    maybe(nj, "ref_lin_vel", cfg.noise.ref_lin_vel);
    maybe(nj, "ref_ang_vel", cfg.noise.ref_ang_vel);
    maybe(nj, "ref_joint", cfg.noise.ref_joint);
    maybe(nj, "ref_height", cfg.noise.ref_height);
  }
  if (j.contains("randomization")) {
    const auto& rj = j.at("randomization");
    auto& r = cfg.rand;
    maybe(rj, "enabled", r.enabled);
    maybe(rj, "action_delay_max", r.action_delay_max);
    maybe_range(rj, "terrain_height", r.terrain_height);
    maybe(rj, "terrain_cell", r.terrain_cell);
    maybe_range(rj, "friction_static", r.friction_static);
    maybe_range(rj, "friction_dynamic", r.friction_dynamic);
    maybe_range(rj, "restitution", r.restitution);
    maybe_range(rj, "default_joint_offset", r.default_joint_offset);
    maybe_range(rj, "mass_offset", r.mass_offset);
    maybe_range(rj, "com_offset_x", r.com_offset_x);
    maybe_range(rj, "com_offset_y", r.com_offset_y);
    maybe_range(rj, "com_offset_z", r.com_offset_z);
    maybe_range(rj, "pd_gain_scale", r.pd_gain_scale);
    maybe_range(rj, "init_pos_xy", r.init_pos_xy);
    maybe_range(rj, "init_pos_z", r.init_pos_z);
    maybe_range(rj, "init_rot_rollpitch", r.init_rot_rollpitch);
    maybe_range(rj, "init_rot_yaw", r.init_rot_yaw);
    maybe_range(rj, "init_vel_xy", r.init_vel_xy);
    maybe_range(rj, "init_vel_z", r.init_vel_z);
    maybe_range(rj, "init_joint", r.init_joint);
    maybe_range(rj, "push_interval_s", r.push_interval_s);
    maybe_range(rj, "push_vel_xy", r.push_vel_xy);
    maybe_range(rj, "push_vel_z", r.push_vel_z);
    maybe_range(rj, "push_ang_rollpitch", r.push_ang_rollpitch);
    maybe_range(rj, "push_ang_yaw", r.push_ang_yaw);
  }
  if (j.contains("reward")) {
    const auto& wj = j.at("reward");
    auto& w = cfg.reward;
    maybe(wj, "alive", w.alive);
    maybe(wj, "kb_pos", w.kb_pos);
    maybe(wj, "kb_rot", w.kb_rot);
    maybe(wj, "kb_lin", w.kb_lin);
    maybe(wj, "kb_ang", w.kb_ang);
    maybe(wj, "root_lin_ratio", w.root_lin_ratio);
    maybe(wj, "root_ang_ratio", w.root_ang_ratio);
    maybe(wj, "five_point", w.five_point);
    maybe(wj, "action_rate", w.action_rate);
    maybe(wj, "joint_acc", w.joint_acc);
    maybe(wj, "joint_limit", w.joint_limit);
    maybe(wj, "undesired_contact", w.undesired_contact);
  }
  if (j.contains("termination")) {
    const auto& tj = j.at("termination");
    maybe(tj, "gravity", cfg.termination.gravity);
    maybe(tj, "key_body_height", cfg.termination.key_body_height);
    maybe(tj, "pelvis_drift", cfg.termination.pelvis_drift);
  }
  maybe(j, "lookahead", cfg.lookahead);
  maybe(j, "enable_noise", cfg.enable_noise);
  maybe(j, "enable_push", cfg.enable_push);
  maybe(j, "enforce_early_termination", cfg.enforce_early_termination);
  cfg.validate();
  return cfg;
}

EnvConfig load_env_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail("env config: cannot open " + path.string());
  json j;
  f >> j;
  return env_config_from_json(j);
}

void save_env_config(const EnvConfig& cfg, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("env config: cannot open for write " + path.string());
  f << env_config_to_json(cfg).dump(2) << "\n";
}

}  // namespace motrack::simenv
