// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/trainer/run_config.hpp"

#include <fstream>

#include "motrack/policy/checkpoint.hpp"

namespace motrack::trainer {

using nlohmann::json;

json ppo_config_to_json(const PPOConfig& c) {
  return json{{"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"clip_eps", c.clip_eps},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"value_coef", c.value_coef},
              {"entropy_coef", c.entropy_coef},
              {"lambda_vel", c.lambda_vel},
              {"lambda_contact", c.lambda_contact},
              {"lambda_ref", c.lambda_ref},
              {"lambda_robot", c.lambda_robot},
              {"lambda_dead", c.lambda_dead},
              {"segment_len", c.segment_len},
              {"num_envs", c.num_envs},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"weight_decay", c.weight_decay},
              {"normalize_advantages", c.normalize_advantages}};
}

PPOConfig ppo_config_from_json(const json& j) {
  PPOConfig c;
  auto g = [&](const char* k, auto& out) {
    if (j.contains(k)) out = j.at(k).get<std::decay_t<decltype(out)>>();
  };
  g("gamma", c.gamma);
  g("gae_lambda", c.gae_lambda);
  g("clip_eps", c.clip_eps);
  g("lr", c.lr);
  g("epochs", c.epochs);
  g("value_coef", c.value_coef);
  g("entropy_coef", c.entropy_coef);
  g("lambda_vel", c.lambda_vel);
  g("lambda_contact", c.lambda_contact);
  g("lambda_ref", c.lambda_ref);
  g("lambda_robot", c.lambda_robot);
  g("lambda_dead", c.lambda_dead);
  g("segment_len", c.segment_len);
  g("num_envs", c.num_envs);
  g("adam_beta1", c.adam_beta1);
  g("adam_beta2", c.adam_beta2);
  g("adam_eps", c.adam_eps);
  g("weight_decay", c.weight_decay);
  g("normalize_advantages", c.normalize_advantages);
  c.validate();
  return c;
}

void apply_model_overrides(policy::ModelConfig& cfg, const json& overrides) {
  auto g = [&](const char* k, auto& out) {
    if (overrides.contains(k)) out = overrides.at(k).get<std::decay_t<decltype(out)>>();
  };
  g("hidden", cfg.hidden);
  g("context", cfg.context);
  g("heads", cfg.heads);
  g("kv_heads", cfg.kv_heads);
  g("blocks", cfg.blocks);
  g("experts", cfg.experts);
  g("top_k", cfg.top_k);
  g("shared_expert", cfg.shared_expert);
  g("expert_hidden", cfg.expert_hidden);
  g("token_mlp_hidden", cfg.token_mlp_hidden);
  g("head_hidden", cfg.head_hidden);
  g("critic_hidden", cfg.critic_hidden);
  g("ema_decay", cfg.ema_decay);
  g("rmsnorm_eps", cfg.rmsnorm_eps);
  g("rope_base", cfg.rope_base);
  g("log_sigma_init", cfg.log_sigma_init);
  g("log_sigma_min", cfg.log_sigma_min);
  g("log_sigma_max", cfg.log_sigma_max);
  g("aux_sigma_min", cfg.aux_sigma_min);
  g("aux_sigma_max", cfg.aux_sigma_max);
  cfg.validate();
}

policy::ModelConfig resolve_model_config(const RunConfig& cfg) {
  auto layout = simenv::ObsLayout::build(cfg.env.robot, cfg.env.lookahead);
  auto mc = policy::ModelConfig::for_env(layout, cfg.env.robot.num_joints, cfg.env.robot.num_ee(),
                                         cfg.env.robot.num_key());
  apply_model_overrides(mc, cfg.model_overrides);
  return mc;
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["env"] = simenv::env_config_to_json(cfg.env);
  j["ppo"] = ppo_config_to_json(cfg.ppo);
  j["model"] = cfg.model_overrides;
  j["data_pack"] = cfg.data_pack;
  j["eval_pack"] = cfg.eval_pack;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["iterations"] = cfg.iterations;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["threads"] = cfg.threads;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("env")) cfg.env = simenv::env_config_from_json(j.at("env"));
  if (j.contains("ppo")) cfg.ppo = ppo_config_from_json(j.at("ppo"));
  if (j.contains("model")) cfg.model_overrides = j.at("model");
  auto g = [&](const char* k, auto& out) {
    if (j.contains(k)) out = j.at(k).get<std::decay_t<decltype(out)>>();
  };
  g("data_pack", cfg.data_pack);
  g("eval_pack", cfg.eval_pack);
  g("out_dir", cfg.out_dir);
  g("seed", cfg.seed);
  g("iterations", cfg.iterations);
  g("checkpoint_every", cfg.checkpoint_every);
  g("threads", cfg.threads);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail("run config: cannot open " + path.string());
  json j;
  f >> j;
  return run_config_from_json(j);
}

void save_resolved_config(const RunConfig& cfg, const policy::ModelConfig& resolved,
                          const std::filesystem::path& path) {
  json j = run_config_to_json(cfg);
  j["model"] = policy::model_config_to_json(resolved);
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("run config: cannot write " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace motrack::trainer
