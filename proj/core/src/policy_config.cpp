// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/policy/config.hpp"

namespace motrack::policy {

ParamCount count_params(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::uint64_t>(cfg.hidden);
  const auto dh = static_cast<std::uint64_t>(cfg.head_dim());
  const auto kvd = static_cast<std::uint64_t>(cfg.kv_dim());
  const auto eh = static_cast<std::uint64_t>(cfg.expert_hidden);
  const auto E = static_cast<std::uint64_t>(cfg.experts);
  const auto obs = static_cast<std::uint64_t>(cfg.obs_dim);
  const auto ref = static_cast<std::uint64_t>(cfg.ref_dim);
  const auto J = static_cast<std::uint64_t>(cfg.action_dim);
  const auto th = static_cast<std::uint64_t>(cfg.token_mlp_hidden);
  const auto hh = static_cast<std::uint64_t>(cfg.head_hidden);

  const std::uint64_t tokenizer = obs * th + th + th * d + d;
  const std::uint64_t expert = d * eh + eh * d;  // bias-free expert MLP
  std::uint64_t backbone_per_block = 0;
  backbone_per_block += d;                 // attention pre-norm gain
  backbone_per_block += d * d;             // wq
  backbone_per_block += 2 * (d * kvd);     // wk, wv
  backbone_per_block += d * d;             // wo
  backbone_per_block += 2 * dh;            // q/k norm gains
  backbone_per_block += d * d + d;         // attention output gate
  backbone_per_block += d;                 // moe pre-norm gain
  const std::uint64_t router_per_block = ref * E + E;
  const std::uint64_t shared_per_block = cfg.shared_expert ? expert : 0;

  const std::uint64_t action_head = d * hh + hh + hh * J + J + J;  // MLP + log_sigma
  const std::uint64_t final_norm = d;

  const auto L = static_cast<std::uint64_t>(cfg.blocks);
  ParamCount pc;
  pc.total = tokenizer + final_norm + action_head +
             L * (backbone_per_block + router_per_block + shared_per_block + E * expert);
  pc.activated = tokenizer + final_norm + action_head +
                 L * (backbone_per_block + router_per_block + shared_per_block +
                      static_cast<std::uint64_t>(cfg.top_k) * expert);

  auto mlp_head = [&](std::uint64_t out) { return d * hh + hh + hh * out + out; };
  pc.aux_heads = mlp_head(2 * static_cast<std::uint64_t>(cfg.vel_dim)) +
                 mlp_head(static_cast<std::uint64_t>(cfg.contact_dim)) +
                 2 * mlp_head(static_cast<std::uint64_t>(cfg.keypos_dim));

  const auto cd = static_cast<std::uint64_t>(cfg.critic_obs_dim);
  const auto ch = static_cast<std::uint64_t>(cfg.critic_hidden);
  pc.critic = cd * ch + ch + ch * ch + ch + ch * 1 + 1;
  return pc;
}

}  // namespace motrack::policy
