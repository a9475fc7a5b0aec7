// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "motrack/policy/config.hpp"
#include "motrack/policy/obs_norm.hpp"

namespace motrack::policy {

using diffmath::Tensor;

/// Parameter container: tokenizer, transformer blocks with routed experts,
/// action/auxiliary heads, the state-independent log-sigma vector, the
/// separate critic MLP, and both EMA normalizers.
template <std::floating_point S>
struct PolicyModel {
  ModelConfig cfg;

  Tensor<S> tok_w1, tok_b1, tok_w2, tok_b2;

  struct Block {
    Tensor<S> att_norm_g;
    Tensor<S> wq, wk, wv, wo;
    Tensor<S> q_norm_g, k_norm_g;
    Tensor<S> gate_w, gate_b;
    Tensor<S> moe_norm_g;
    Tensor<S> router_w, router_b;
    Tensor<S> shared_w1, shared_w2;
    std::vector<Tensor<S>> expert_w1, expert_w2;
  };
  std::vector<Block> blocks;
  Tensor<S> final_norm_g;

  Tensor<S> act_w1, act_b1, act_w2, act_b2;
  Tensor<S> log_sigma;  // [1 x J], state independent

  Tensor<S> vel_w1, vel_b1, vel_w2, vel_b2;
  Tensor<S> con_w1, con_b1, con_w2, con_b2;
  Tensor<S> ref_w1, ref_b1, ref_w2, ref_b2;
  Tensor<S> rob_w1, rob_b1, rob_w2, rob_b2;

  Tensor<S> v_w1, v_b1, v_w2, v_b2, v_w3, v_b3;

  ObsNorm<S> actor_norm;
  ObsNorm<S> critic_norm;

  void init(Rng& rng);

  /// Visits every trainable tensor as (name, tensor). Order is fixed and is
  /// the checkpoint order.
  template <typename F>
  void visit_params(F&& fn) {
    fn("tok.w1", tok_w1);
    fn("tok.b1", tok_b1);
    fn("tok.w2", tok_w2);
    fn("tok.b2", tok_b2);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      auto& b = blocks[l];
      const std::string p = "block" + std::to_string(l) + ".";
      fn(p + "att_norm_g", b.att_norm_g);
      fn(p + "wq", b.wq);
      fn(p + "wk", b.wk);
      fn(p + "wv", b.wv);
      fn(p + "wo", b.wo);
      fn(p + "q_norm_g", b.q_norm_g);
      fn(p + "k_norm_g", b.k_norm_g);
      fn(p + "gate_w", b.gate_w);
      fn(p + "gate_b", b.gate_b);
      fn(p + "moe_norm_g", b.moe_norm_g);
      fn(p + "router_w", b.router_w);
      fn(p + "router_b", b.router_b);
      fn(p + "shared_w1", b.shared_w1);
      fn(p + "shared_w2", b.shared_w2);
      for (std::size_t e = 0; e < b.expert_w1.size(); ++e) {
        fn(p + "expert" + std::to_string(e) + ".w1", b.expert_w1[e]);
        fn(p + "expert" + std::to_string(e) + ".w2", b.expert_w2[e]);
      }
    }
    fn("final_norm_g", final_norm_g);
    fn("act.w1", act_w1);
    fn("act.b1", act_b1);
    fn("act.w2", act_w2);
    fn("act.b2", act_b2);
    fn("log_sigma", log_sigma);
    fn("vel.w1", vel_w1);
    fn("vel.b1", vel_b1);
    fn("vel.w2", vel_w2);
    fn("vel.b2", vel_b2);
    fn("con.w1", con_w1);
    fn("con.b1", con_b1);
    fn("con.w2", con_w2);
    fn("con.b2", con_b2);
    fn("ref.w1", ref_w1);
    fn("ref.b1", ref_b1);
    fn("ref.w2", ref_w2);
    fn("ref.b2", ref_b2);
    fn("rob.w1", rob_w1);
    fn("rob.b1", rob_b1);
    fn("rob.w2", rob_w2);
    fn("rob.b2", rob_b2);
    fn("v.w1", v_w1);
    fn("v.b1", v_b1);
    fn("v.w2", v_w2);
    fn("v.b2", v_b2);
    fn("v.w3", v_w3);
    fn("v.b3", v_b3);
  }

  template <typename F>
  void visit_params(F&& fn) const {
    const_cast<PolicyModel*>(this)->visit_params(
        [&fn](const std::string& n, Tensor<S>& t) { fn(n, static_cast<const Tensor<S>&>(t)); });
  }

  ParamCount param_count() const;

  /// Hash over parameters and both normalizers; side-effect-freedom checks.
  std::uint64_t state_hash() const;
};

template <std::floating_point S>
void PolicyModel<S>::init(Rng& rng) {
  cfg.validate();
  const int d = cfg.hidden;
  auto lin = [&rng](int in, int out) {
    return Tensor<S>::randn(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  };
  auto gains = [](int n) { return Tensor<S>::full(1, n, S{1}); };

  tok_w1 = lin(cfg.obs_dim, cfg.token_mlp_hidden);
  tok_b1 = Tensor<S>(1, cfg.token_mlp_hidden);
  tok_w2 = lin(cfg.token_mlp_hidden, d);
  tok_b2 = Tensor<S>(1, d);

  blocks.assign(static_cast<std::size_t>(cfg.blocks), Block{});
  for (auto& b : blocks) {
    b.att_norm_g = gains(d);
    b.wq = lin(d, d);
    b.wk = lin(d, cfg.kv_dim());
    b.wv = lin(d, cfg.kv_dim());
    b.wo = lin(d, d);
    b.q_norm_g = gains(cfg.head_dim());
    b.k_norm_g = gains(cfg.head_dim());
    b.gate_w = lin(d, d);
    b.gate_b = Tensor<S>(1, d);
    b.moe_norm_g = gains(d);
    b.router_w = lin(cfg.ref_dim, cfg.experts);
    b.router_b = Tensor<S>(1, cfg.experts);
    b.shared_w1 = lin(d, cfg.expert_hidden);
    b.shared_w2 = lin(cfg.expert_hidden, d);
    b.expert_w1.clear();
    b.expert_w2.clear();
    for (int e = 0; e < cfg.experts; ++e) {
      b.expert_w1.push_back(lin(d, cfg.expert_hidden));
      b.expert_w2.push_back(lin(cfg.expert_hidden, d));
    }
  }
  final_norm_g = gains(d);

  act_w1 = lin(d, cfg.head_hidden);
  act_b1 = Tensor<S>(1, cfg.head_hidden);
  act_w2 = lin(cfg.head_hidden, cfg.action_dim);
  act_b2 = Tensor<S>(1, cfg.action_dim);
  log_sigma = Tensor<S>::full(1, cfg.action_dim, static_cast<S>(cfg.log_sigma_init));

  auto head = [&](Tensor<S>& w1, Tensor<S>& b1, Tensor<S>& w2, Tensor<S>& b2, int out) {
    w1 = lin(d, cfg.head_hidden);
    b1 = Tensor<S>(1, cfg.head_hidden);
    w2 = lin(cfg.head_hidden, out);
    b2 = Tensor<S>(1, out);
  };
  head(vel_w1, vel_b1, vel_w2, vel_b2, 2 * cfg.vel_dim);
  head(con_w1, con_b1, con_w2, con_b2, cfg.contact_dim);
  head(ref_w1, ref_b1, ref_w2, ref_b2, cfg.keypos_dim);
  head(rob_w1, rob_b1, rob_w2, rob_b2, cfg.keypos_dim);

  v_w1 = lin(cfg.critic_obs_dim, cfg.critic_hidden);
  v_b1 = Tensor<S>(1, cfg.critic_hidden);
  v_w2 = lin(cfg.critic_hidden, cfg.critic_hidden);
  v_b2 = Tensor<S>(1, cfg.critic_hidden);
  v_w3 = lin(cfg.critic_hidden, 1);
  v_b3 = Tensor<S>(1, 1);

  actor_norm.init(cfg.obs_dim, static_cast<S>(cfg.ema_decay));
  critic_norm.init(cfg.critic_obs_dim, static_cast<S>(cfg.ema_decay));
}

template <std::floating_point S>
ParamCount PolicyModel<S>::param_count() const {
  // Recount from the allocated tensors; must agree with count_params(cfg).
  ParamCount pc;
  std::uint64_t aux = 0, critic = 0, experts_total = 0, experts_one = 0, rest = 0;
  visit_params([&](const std::string& name, const Tensor<S>& t) {
    const auto n = static_cast<std::uint64_t>(t.numel());
    if (name.rfind("v.", 0) == 0) {
      critic += n;
    } else if (name.rfind("vel.", 0) == 0 || name.rfind("con.", 0) == 0 || name.rfind("ref.", 0) == 0 ||
               name.rfind("rob.", 0) == 0) {
      aux += n;
    } else if (name.find(".expert") != std::string::npos) {
      experts_total += n;
    } else {
      rest += n;
    }
  });
  if (!blocks.empty() && !blocks[0].expert_w1.empty())
    experts_one = static_cast<std::uint64_t>(blocks[0].expert_w1[0].numel() + blocks[0].expert_w2[0].numel());
  pc.total = rest + experts_total;
  pc.activated = rest + static_cast<std::uint64_t>(cfg.blocks) * static_cast<std::uint64_t>(cfg.top_k) * experts_one;
  pc.aux_heads = aux;
  pc.critic = critic;
  return pc;
}

template <std::floating_point S>
std::uint64_t PolicyModel<S>::state_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  visit_params([&](const std::string& name, const Tensor<S>& t) {
    h = fnv1a(name, h);
    h = fnv1a(t.data(), t.numel() * sizeof(S), h);
  });
  for (const auto* n : {&actor_norm, &critic_norm}) {
    h = fnv1a(n->mean.data(), n->mean.numel() * sizeof(S), h);
    h = fnv1a(n->var.data(), n->var.numel() * sizeof(S), h);
    h = fnv1a(n->pending_mean.data(), n->pending_mean.numel() * sizeof(S), h);
    h = fnv1a(n->pending_var.data(), n->pending_var.numel() * sizeof(S), h);
  }
  return h;
}

}  // namespace motrack::policy
