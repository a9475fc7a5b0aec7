// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "motrack/simenv/observation.hpp"

namespace motrack::policy {

/// Architecture hyperparameters. Dimensions coupled to the environment
/// (observation, action, auxiliary targets) are filled by `for_env`.
struct ModelConfig {
  // environment-coupled
  int obs_dim = 0;
  int ref_dim = 0;         // reference slice width (router input)
  int critic_obs_dim = 0;  // clean + privileged
  int action_dim = 0;
  int vel_dim = 3;
  int contact_dim = 0;   // K_c supervised contact bodies
  int keypos_dim = 0;    // 3 * K_p supervised position bodies

  // backbone
  int hidden = 64;   // d
  int context = 32;  // C
  int heads = 4;     // n_h query heads
  int kv_heads = 2;  // n_kv
  int blocks = 1;    // transformer blocks, each attention + MoE sublayer

  // mixture of experts
  int experts = 16;  // E
  int top_k = 2;     // k
  bool shared_expert = true;
  int expert_hidden = 128;

  // projections / heads
  int token_mlp_hidden = 128;
  int head_hidden = 64;
  int critic_hidden = 256;

  double ema_decay = 0.995;
  double rmsnorm_eps = 1e-6;
  double rope_base = 10000.0;
  double log_sigma_init = -0.7;
  double log_sigma_min = -5.0;
  double log_sigma_max = 1.0;
  double aux_sigma_min = 1e-3;
  double aux_sigma_max = 10.0;

  int head_dim() const { return hidden / heads; }
  int kv_dim() const { return kv_heads * head_dim(); }

  void validate() const {
    if (obs_dim < 1 || ref_dim < 1 || ref_dim > obs_dim) fail("ModelConfig: bad observation dims");
    if (critic_obs_dim < 1 || action_dim < 1) fail("ModelConfig: bad critic/action dims");
    if (hidden < 1 || context < 1 || blocks < 1) fail("ModelConfig: bad backbone dims");
    if (heads < 1 || kv_heads < 1 || heads % kv_heads != 0) fail("ModelConfig: heads must divide into kv heads");
    if (hidden % heads != 0) fail("ModelConfig: hidden must divide heads");
    if (head_dim() % 2 != 0) fail("ModelConfig: head dim must be even for rotary embedding");
    if (top_k < 1 || top_k > experts) fail("ModelConfig: need 1 <= top_k <= experts");
    if (expert_hidden < 1 || token_mlp_hidden < 1 || head_hidden < 1 || critic_hidden < 1)
      fail("ModelConfig: bad hidden sizes");
    if (ema_decay <= 0.0 || ema_decay >= 1.0) fail("ModelConfig: ema_decay in (0,1)");
  }

  /// Desk-scale defaults bound to an environment layout.
  static ModelConfig for_env(const simenv::ObsLayout& layout, int action_dim, int num_ee, int num_key) {
    ModelConfig c;
    c.obs_dim = layout.total;
    c.ref_dim = layout.ref_dim();
    c.critic_obs_dim = layout.critic_dim();
    c.action_dim = action_dim;
    c.contact_dim = num_ee;
    c.keypos_dim = 3 * num_key;
    c.hidden = 64;
    c.context = 32;
    c.heads = 4;
    c.kv_heads = 2;
    c.blocks = 1;  // cached inference equals a windowed recompute only for one block
    c.experts = 16;
    c.top_k = 2;
    c.expert_hidden = 128;
    c.validate();
    return c;
  }

  /// Released-configuration scale: d=512, C=32, 8 query / 4 kv heads, one
  /// sparse-MoE block, E=1024 experts, top-2 routing plus a shared expert.
  static ModelConfig paper_scale(const simenv::ObsLayout& layout, int action_dim, int num_ee, int num_key) {
    ModelConfig c = for_env(layout, action_dim, num_ee, num_key);
    c.hidden = 512;
    c.context = 32;
    c.heads = 8;
    c.kv_heads = 4;
    c.blocks = 1;
    c.experts = 1024;
    c.top_k = 2;
    c.expert_hidden = 256;
    c.token_mlp_hidden = 512;
    c.head_hidden = 256;
    c.validate();
    return c;
  }
};

struct ParamCount {
  std::uint64_t total = 0;      // deployment policy path, all experts
  std::uint64_t activated = 0;  // per-token: backbone + router + shared + k experts
  std::uint64_t aux_heads = 0;  // training-only heads, excluded from the ratio
  std::uint64_t critic = 0;     // training-only, excluded from the ratio
  double activated_fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(activated) / static_cast<double>(total);
  }
};

/// Pure arithmetic over the config; must agree with the allocated model.
ParamCount count_params(const ModelConfig& cfg);

}  // namespace motrack::policy
