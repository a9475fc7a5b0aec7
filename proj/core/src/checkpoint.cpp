// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/policy/checkpoint.hpp"

namespace motrack::policy {

using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  return json{{"obs_dim", c.obs_dim},
              {"ref_dim", c.ref_dim},
              {"critic_obs_dim", c.critic_obs_dim},
              {"action_dim", c.action_dim},
              {"vel_dim", c.vel_dim},
              {"contact_dim", c.contact_dim},
              {"keypos_dim", c.keypos_dim},
              {"hidden", c.hidden},
              {"context", c.context},
              {"heads", c.heads},
              {"kv_heads", c.kv_heads},
              {"blocks", c.blocks},
              {"experts", c.experts},
              {"top_k", c.top_k},
              {"shared_expert", c.shared_expert},
              {"expert_hidden", c.expert_hidden},
              {"token_mlp_hidden", c.token_mlp_hidden},
              {"head_hidden", c.head_hidden},
              {"critic_hidden", c.critic_hidden},
              {"ema_decay", c.ema_decay},
              {"rmsnorm_eps", c.rmsnorm_eps},
              {"rope_base", c.rope_base},
              {"log_sigma_init", c.log_sigma_init},
              {"log_sigma_min", c.log_sigma_min},
              {"log_sigma_max", c.log_sigma_max},
              {"aux_sigma_min", c.aux_sigma_min},
              {"aux_sigma_max", c.aux_sigma_max}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.obs_dim = j.at("obs_dim").get<int>();
  c.ref_dim = j.at("ref_dim").get<int>();
  c.critic_obs_dim = j.at("critic_obs_dim").get<int>();
  c.action_dim = j.at("action_dim").get<int>();
  c.vel_dim = j.at("vel_dim").get<int>();
  c.contact_dim = j.at("contact_dim").get<int>();
  c.keypos_dim = j.at("keypos_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.context = j.at("context").get<int>();
  c.heads = j.at("heads").get<int>();
  c.kv_heads = j.at("kv_heads").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.experts = j.at("experts").get<int>();
  c.top_k = j.at("top_k").get<int>();
  c.shared_expert = j.at("shared_expert").get<bool>();
  c.expert_hidden = j.at("expert_hidden").get<int>();
  c.token_mlp_hidden = j.at("token_mlp_hidden").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.critic_hidden = j.at("critic_hidden").get<int>();
  c.ema_decay = j.at("ema_decay").get<double>();
  c.rmsnorm_eps = j.at("rmsnorm_eps").get<double>();
  c.rope_base = j.at("rope_base").get<double>();
  c.log_sigma_init = j.at("log_sigma_init").get<double>();
  c.log_sigma_min = j.at("log_sigma_min").get<double>();
  c.log_sigma_max = j.at("log_sigma_max").get<double>();
  c.aux_sigma_min = j.at("aux_sigma_min").get<double>();
  c.aux_sigma_max = j.at("aux_sigma_max").get<double>();
  c.validate();
  return c;
}

}  // namespace motrack::policy
