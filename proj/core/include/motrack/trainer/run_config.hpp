// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include "motrack/policy/config.hpp"
#include "motrack/simenv/env_config.hpp"
#include "motrack/trainer/ppo.hpp"

namespace motrack::trainer {

/// Declarative run definition: environment, PPO and model settings, data
/// paths, seeding and output location. Every field is optional in the file;
/// defaults mirror the built-in tables. The "model" section holds
/// architecture knobs (hidden, context, heads, kv_heads, blocks, experts,
/// top_k, expert_hidden, ...) applied on top of the environment-derived
/// dimensions; the resolved form embeds the fully-expanded model config.
struct RunConfig {
  simenv::EnvConfig env;
  PPOConfig ppo;
  nlohmann::json model_overrides = nlohmann::json::object();
  std::string data_pack;
  std::string eval_pack;
  std::string out_dir = "run_out";
  std::uint64_t seed = 0;
  int iterations = 100;
  int checkpoint_every = 0;
  int threads = 1;
};

nlohmann::json ppo_config_to_json(const PPOConfig& cfg);
PPOConfig ppo_config_from_json(const nlohmann::json& j);

/// Applies the override section onto a resolved model config.
void apply_model_overrides(policy::ModelConfig& cfg, const nlohmann::json& overrides);

/// Builds the resolved model config for this run's environment.
policy::ModelConfig resolve_model_config(const RunConfig& cfg);

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the fully-resolved config (model section expanded) next to the
/// checkpoints so a run can be reproduced from its artifacts alone.
void save_resolved_config(const RunConfig& cfg, const policy::ModelConfig& resolved,
                          const std::filesystem::path& path);

}  // namespace motrack::trainer
