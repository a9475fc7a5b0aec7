// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "motrack/simenv/env.hpp"

namespace motrack::simenv {

// Declarative environment config. Every field is optional in the file and
// falls back to the built-in defaults (the training tables). Schema:
//
// {
//   "robot":  {"preset": "biped8"|"minimal2", "kp": ..., "kd": ...,
//              "action_scale": ..., "control_dt": ..., "substeps": ...},
//   "noise":  {"gravity": 0.1, "ang_vel": 0.2, "joint_pos": 0.01,
//              "joint_vel": 0.5, "ref_gravity": 0.1, "ref_lin_vel": 0.1,
//              "ref_ang_vel": 0.1, "ref_joint": 0.05, "ref_height": 0.1},
//   "randomization": {"enabled": true, "action_delay_max": 2,
//              "<name>": [lo, hi] for every sampled range},
//   "reward": {"alive": 0.1, "kb_pos": 1.0, ... per-term weights},
//   "termination": {"gravity": 0.8, "key_body_height": 0.25,
//              "pelvis_drift": 0.25},
//   "lookahead": 10, "enable_noise": true, "enable_push": true
// }
nlohmann::json env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j);

EnvConfig load_env_config(const std::filesystem::path& path);
void save_env_config(const EnvConfig& cfg, const std::filesystem::path& path);

}  // namespace motrack::simenv
