// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <numeric>

#include "motrack/diffmath/ops.hpp"
#include "motrack/policy/model.hpp"

namespace motrack::policy {

using diffmath::Tape;
using diffmath::Var;

/// Tracks how many routed-expert MLPs actually ran; sparsity is an
/// implementation obligation, not an assumption.
struct ExpertEvalCounter {
  std::uint64_t routed_evals = 0;
  std::uint64_t tokens = 0;
};

/// One token's routing outcome. `experts` is ordered by descending score
/// (ties broken toward the lower index); `threshold` is the k-th selected
/// score, i.e. the minimum over selected.
struct RouterDecision {
  std::vector<int> experts;
  std::vector<double> alpha;
  std::vector<double> scores;
  double threshold = 0.0;
};

/// Top-k by score, descending, index-ascending tie-break.
template <std::floating_point S>
std::vector<int> topk_select(const S* scores, int num, int k) {
  if (k > num) fail("route: top_k exceeds expert count");
  std::vector<int> idx(static_cast<std::size_t>(num));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [scores](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

/// Eager routing for one token: scores = ref * W + b, top-k selection,
/// alpha = softmax over the selected scores.
template <std::floating_point S>
RouterDecision route(const Tensor<S>& router_w, const Tensor<S>& router_b,
                     std::type_identity_t<std::span<const S>> ref_features, int top_k) {
  const int E = router_w.cols();
  if (static_cast<int>(ref_features.size()) != router_w.rows()) fail("route: feature dim mismatch");
  RouterDecision d;
  d.scores.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    S acc = router_b[static_cast<std::size_t>(e)];
    for (int i = 0; i < router_w.rows(); ++i)
      acc += ref_features[static_cast<std::size_t>(i)] * router_w(i, e);
    d.scores[static_cast<std::size_t>(e)] = static_cast<double>(acc);
  }
  std::vector<S> s_cast(d.scores.begin(), d.scores.end());
  d.experts = topk_select(s_cast.data(), E, top_k);
  double mx = d.scores[static_cast<std::size_t>(d.experts[0])];
  for (int e : d.experts) mx = std::max(mx, d.scores[static_cast<std::size_t>(e)]);
  double denom = 0.0;
  d.alpha.resize(d.experts.size());
  d.threshold = d.scores[static_cast<std::size_t>(d.experts.back())];
  for (std::size_t i = 0; i < d.experts.size(); ++i) {
    d.alpha[i] = std::exp(d.scores[static_cast<std::size_t>(d.experts[i])] - mx);
    denom += d.alpha[i];
    d.threshold = std::min(d.threshold, d.scores[static_cast<std::size_t>(d.experts[i])]);
  }
  for (auto& a : d.alpha) a /= denom;
  return d;
}

/// Eager MoE combination for one token: f_sh(u) + sum_i alpha_i f_i(u).
template <std::floating_point S>
std::vector<S> moe_apply(const typename PolicyModel<S>::Block& block, bool shared_expert,
                         std::type_identity_t<std::span<const S>> u, const RouterDecision& d,
                         ExpertEvalCounter* counter = nullptr) {
  const int dim = block.shared_w1.rows();
  const int eh = block.shared_w1.cols();
  if (static_cast<int>(u.size()) != dim) fail("moe_apply: input dim mismatch");
  std::vector<S> out(static_cast<std::size_t>(dim), S{0});
  std::vector<S> h(static_cast<std::size_t>(eh));
  auto run_expert = [&](const Tensor<S>& w1, const Tensor<S>& w2, S alpha) {
    for (int j = 0; j < eh; ++j) {
      S acc{0};
      for (int i = 0; i < dim; ++i) acc += u[static_cast<std::size_t>(i)] * w1(i, j);
      h[static_cast<std::size_t>(j)] = acc / (S{1} + std::exp(-acc));  // silu
    }
    for (int o = 0; o < dim; ++o) {
      S acc{0};
      for (int j = 0; j < eh; ++j) acc += h[static_cast<std::size_t>(j)] * w2(j, o);
      out[static_cast<std::size_t>(o)] += alpha * acc;
    }
  };
  if (shared_expert) run_expert(block.shared_w1, block.shared_w2, S{1});
  for (std::size_t i = 0; i < d.experts.size(); ++i) {
    run_expert(block.expert_w1[static_cast<std::size_t>(d.experts[i])],
               block.expert_w2[static_cast<std::size_t>(d.experts[i])], static_cast<S>(d.alpha[i]));
    if (counter) counter->routed_evals += 1;
  }
  if (counter) counter->tokens += 1;
  return out;
}

// ---------------------------------------------------------------------------
// tape-side forward
// ---------------------------------------------------------------------------

/// Var mirror of the model parameters, bound once per tape.
template <std::floating_point S>
struct ParamVars {
  Var<S> tok_w1, tok_b1, tok_w2, tok_b2;
  struct Block {
    Var<S> att_norm_g, wq, wk, wv, wo, q_norm_g, k_norm_g, gate_w, gate_b;
    Var<S> moe_norm_g, router_w, router_b, shared_w1, shared_w2;
    std::vector<Var<S>> expert_w1, expert_w2;
  };
  std::vector<Block> blocks;
  Var<S> final_norm_g;
  Var<S> act_w1, act_b1, act_w2, act_b2, log_sigma;
  Var<S> vel_w1, vel_b1, vel_w2, vel_b2;
  Var<S> con_w1, con_b1, con_w2, con_b2;
  Var<S> ref_w1, ref_b1, ref_w2, ref_b2;
  Var<S> rob_w1, rob_b1, rob_w2, rob_b2;
  Var<S> v_w1, v_b1, v_w2, v_b2, v_w3, v_b3;

  /// Vars aligned with PolicyModel::visit_params order (optimizer contract).
  std::vector<Var<S>> ordered;

  static ParamVars bind(Tape<S>& tape, const PolicyModel<S>& m, bool trainable) {
    std::map<const Tensor<S>*, Var<S>> by_addr;
    auto mk = [&](const Tensor<S>& t) {
      Var<S> v = trainable ? tape.leaf(t) : tape.constant(t);
      by_addr[&t] = v;
      return v;
    };
    ParamVars pv;
    pv.tok_w1 = mk(m.tok_w1);
    pv.tok_b1 = mk(m.tok_b1);
    pv.tok_w2 = mk(m.tok_w2);
    pv.tok_b2 = mk(m.tok_b2);
    pv.blocks.resize(m.blocks.size());
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
      const auto& b = m.blocks[l];
      auto& o = pv.blocks[l];
      o.att_norm_g = mk(b.att_norm_g);
      o.wq = mk(b.wq);
      o.wk = mk(b.wk);
      o.wv = mk(b.wv);
      o.wo = mk(b.wo);
      o.q_norm_g = mk(b.q_norm_g);
      o.k_norm_g = mk(b.k_norm_g);
      o.gate_w = mk(b.gate_w);
      o.gate_b = mk(b.gate_b);
      o.moe_norm_g = mk(b.moe_norm_g);
      o.router_w = mk(b.router_w);
      o.router_b = mk(b.router_b);
      o.shared_w1 = mk(b.shared_w1);
      o.shared_w2 = mk(b.shared_w2);
      o.expert_w1.reserve(b.expert_w1.size());
      o.expert_w2.reserve(b.expert_w2.size());
      for (std::size_t e = 0; e < b.expert_w1.size(); ++e) {
        o.expert_w1.push_back(mk(b.expert_w1[e]));
        o.expert_w2.push_back(mk(b.expert_w2[e]));
      }
    }
    pv.final_norm_g = mk(m.final_norm_g);
    pv.act_w1 = mk(m.act_w1);
    pv.act_b1 = mk(m.act_b1);
    pv.act_w2 = mk(m.act_w2);
    pv.act_b2 = mk(m.act_b2);
    pv.log_sigma = mk(m.log_sigma);
    pv.vel_w1 = mk(m.vel_w1);
    pv.vel_b1 = mk(m.vel_b1);
    pv.vel_w2 = mk(m.vel_w2);
    pv.vel_b2 = mk(m.vel_b2);
    pv.con_w1 = mk(m.con_w1);
    pv.con_b1 = mk(m.con_b1);
    pv.con_w2 = mk(m.con_w2);
    pv.con_b2 = mk(m.con_b2);
    pv.ref_w1 = mk(m.ref_w1);
    pv.ref_b1 = mk(m.ref_b1);
    pv.ref_w2 = mk(m.ref_w2);
    pv.ref_b2 = mk(m.ref_b2);
    pv.rob_w1 = mk(m.rob_w1);
    pv.rob_b1 = mk(m.rob_b1);
    pv.rob_w2 = mk(m.rob_w2);
    pv.rob_b2 = mk(m.rob_b2);
    pv.v_w1 = mk(m.v_w1);
    pv.v_b1 = mk(m.v_b1);
    pv.v_w2 = mk(m.v_w2);
    pv.v_b2 = mk(m.v_b2);
    pv.v_w3 = mk(m.v_w3);
    pv.v_b3 = mk(m.v_b3);
    m.visit_params([&](const std::string&, const Tensor<S>& t) { pv.ordered.push_back(by_addr.at(&t)); });
    return pv;
  }
};

template <std::floating_point S>
struct LayerRouting {
  Var<S> scores;  // [T x E], differentiable toward the router
  Var<S> tau;     // [T x 1], k-th selected score per token
  std::vector<RouterDecision> decisions;
};

template <std::floating_point S>
struct SequenceOutput {
  Var<S> mu;                 // [T x J]
  Var<S> log_sigma_clamped;  // [1 x J]
  Var<S> sigma;              // [1 x J]
  Var<S> pre_moe;            // [T x d], residual stream entering the first MoE sublayer
  Var<S> vel_mu, vel_sigma;  // [T x vel_dim]
  Var<S> contact_logits;     // [T x K_c]
  Var<S> ref_pos, robot_pos; // [T x 3 K_p]
  std::vector<LayerRouting<S>> routing;
};

/// Causal mask limited to a context window of `window` tokens.
template <std::floating_point S>
Tensor<S> causal_window_mask(int T, int window) {
  Tensor<S> m(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j <= i; ++j)
      if (i - j < window) m(i, j) = S{1};
  return m;
}

/// Batched causal pass over a segment of already-normalized observations.
/// `positions` supplies the rotary positions (one per row).
template <std::floating_point S>
SequenceOutput<S> forward_sequence(Tape<S>& tape, const ParamVars<S>& pv, const ModelConfig& cfg,
                                   const Tensor<S>& norm_obs, std::span<const std::int64_t> positions,
                                   ExpertEvalCounter* counter = nullptr) {
  using namespace diffmath;
  const int T = norm_obs.rows();
  if (T < 1) fail("forward_sequence: empty segment");
  if (T > cfg.context) fail("forward_sequence: segment longer than the context window");
  if (norm_obs.cols() != cfg.obs_dim) fail("forward_sequence: observation layout mismatch");
  if (static_cast<int>(positions.size()) != T) fail("forward_sequence: positions size mismatch");
  const S eps = static_cast<S>(cfg.rmsnorm_eps);
  const int dh = cfg.head_dim();
  const int group = cfg.heads / cfg.kv_heads;

  Var<S> obs = tape.constant(norm_obs);
  Var<S> ref_slice = slice_cols(obs, cfg.obs_dim - cfg.ref_dim, cfg.obs_dim);
  std::vector<std::int64_t> pos(positions.begin(), positions.end());

  // tokenizer projection
  Var<S> x = add_bias(matmul(silu(add_bias(matmul(obs, pv.tok_w1), pv.tok_b1)), pv.tok_w2), pv.tok_b2);

  const Tensor<S> mask = causal_window_mask<S>(T, cfg.context);
  const S att_scale = S{1} / std::sqrt(static_cast<S>(dh));

  SequenceOutput<S> out;
  for (int l = 0; l < cfg.blocks; ++l) {
    const auto& blk = pv.blocks[static_cast<std::size_t>(l)];
    // attention sublayer
    Var<S> u = rmsnorm_rows(x, blk.att_norm_g, eps);
    Var<S> Q = matmul(u, blk.wq);
    Var<S> K = matmul(u, blk.wk);
    Var<S> V = matmul(u, blk.wv);
    std::vector<Var<S>> kv_k, kv_v;
    for (int g = 0; g < cfg.kv_heads; ++g) {
      Var<S> kh = rope_rows(rmsnorm_rows(slice_cols(K, g * dh, (g + 1) * dh), blk.k_norm_g, eps), pos,
                            cfg.rope_base);
      kv_k.push_back(kh);
      kv_v.push_back(slice_cols(V, g * dh, (g + 1) * dh));
    }
    std::vector<Var<S>> head_out;
    for (int h = 0; h < cfg.heads; ++h) {
      Var<S> qh = rope_rows(rmsnorm_rows(slice_cols(Q, h * dh, (h + 1) * dh), blk.q_norm_g, eps), pos,
                            cfg.rope_base);
      const auto g = static_cast<std::size_t>(h / group);
      Var<S> scores = scale(matmul(qh, kv_k[g], false, true), att_scale);
      Var<S> probs = softmax_rows(scores, &mask);
      head_out.push_back(matmul(probs, kv_v[g]));
    }
    Var<S> att = concat_cols(std::span<const Var<S>>(head_out));
    Var<S> gate = sigmoid(add_bias(matmul(x, blk.gate_w), blk.gate_b));
    Var<S> y = add(x, matmul(mul(att, gate), blk.wo));

    if (l == 0) out.pre_moe = y;

    // sparse MoE sublayer
    Var<S> um = rmsnorm_rows(y, blk.moe_norm_g, eps);
    Var<S> shared = matmul(silu(matmul(um, blk.shared_w1)), blk.shared_w2);

    LayerRouting<S> routing;
    routing.scores = add_bias(matmul(ref_slice, blk.router_w), blk.router_b);
    std::vector<Var<S>> routed_rows, tau_rows;
    for (int t = 0; t < T; ++t) {
      Var<S> score_row = row(routing.scores, t);
      const Tensor<S>& sv = score_row.val();
      std::vector<int> sel = topk_select(sv.data(), cfg.experts, cfg.top_k);
      Var<S> alpha = softmax_rows(select_cols(score_row, sel));
      Var<S> u_t = row(um, t);
      Var<S> acc;
      for (int i = 0; i < cfg.top_k; ++i) {
        const auto e = static_cast<std::size_t>(sel[static_cast<std::size_t>(i)]);
        Var<S> fe = matmul(silu(matmul(u_t, blk.expert_w1[e])), blk.expert_w2[e]);
        if (counter) counter->routed_evals += 1;
        Var<S> contrib = mul_scalar(fe, select_cols(alpha, {i}));
        acc = acc.valid() ? add(acc, contrib) : contrib;
      }
      routed_rows.push_back(acc);
      // tau: the k-th (minimum) selected score; sel is sorted descending
      tau_rows.push_back(select_cols(score_row, {sel.back()}));
      if (counter) counter->tokens += 1;

      RouterDecision d;
      d.experts = sel;
      d.scores.assign(sv.data(), sv.data() + cfg.experts);
      const Tensor<S>& av = alpha.val();
      d.alpha.assign(av.data(), av.data() + cfg.top_k);
      d.threshold = static_cast<double>(sv[static_cast<std::size_t>(sel.back())]);
      routing.decisions.push_back(std::move(d));
    }
    routing.tau = stack_rows(std::span<const Var<S>>(tau_rows));
    out.routing.push_back(std::move(routing));

    x = add(y, add(shared, stack_rows(std::span<const Var<S>>(routed_rows))));
  }

  Var<S> final = rmsnorm_rows(x, pv.final_norm_g, eps);
  out.mu = add_bias(matmul(silu(add_bias(matmul(final, pv.act_w1), pv.act_b1)), pv.act_w2), pv.act_b2);
  out.log_sigma_clamped = clamp(pv.log_sigma, static_cast<S>(cfg.log_sigma_min), static_cast<S>(cfg.log_sigma_max));
  out.sigma = exp_op(out.log_sigma_clamped);

  // auxiliary heads read the pre-MoE representation; their gradients reach
  // the tokenizer and first attention sublayer but never any expert.
  auto head = [&](const Var<S>& w1, const Var<S>& b1, const Var<S>& w2, const Var<S>& b2) {
    return add_bias(matmul(silu(add_bias(matmul(out.pre_moe, w1), b1)), w2), b2);
  };
  Var<S> vel_out = head(pv.vel_w1, pv.vel_b1, pv.vel_w2, pv.vel_b2);
  out.vel_mu = slice_cols(vel_out, 0, cfg.vel_dim);
  out.vel_sigma = exp_op(clamp(slice_cols(vel_out, cfg.vel_dim, 2 * cfg.vel_dim),
                               static_cast<S>(std::log(cfg.aux_sigma_min)),
                               static_cast<S>(std::log(cfg.aux_sigma_max))));
  out.contact_logits = head(pv.con_w1, pv.con_b1, pv.con_w2, pv.con_b2);
  out.ref_pos = head(pv.ref_w1, pv.ref_b1, pv.ref_w2, pv.ref_b2);
  out.robot_pos = head(pv.rob_w1, pv.rob_b1, pv.rob_w2, pv.rob_b2);
  return out;
}

/// Critic MLP over already-normalized clean+privileged rows.
template <std::floating_point S>
Var<S> critic_forward(Tape<S>& tape, const ParamVars<S>& pv, const Tensor<S>& norm_critic_obs) {
  using namespace diffmath;
  Var<S> o = tape.constant(norm_critic_obs);
  Var<S> h1 = silu(add_bias(matmul(o, pv.v_w1), pv.v_b1));
  Var<S> h2 = silu(add_bias(matmul(h1, pv.v_w2), pv.v_b2));
  return add_bias(matmul(h2, pv.v_w3), pv.v_b3);
}

// ---------------------------------------------------------------------------
// eager single-vector helpers (rollout path)
// ---------------------------------------------------------------------------

enum class NormMode { Train, Eval };

/// Normalizes one raw observation with the active statistics and projects it
/// to the hidden dimension. Train mode also streams the raw vector into the
/// pending statistics; eval mode never mutates anything.
template <std::floating_point S>
Tensor<S> tokenize(PolicyModel<S>& model, std::type_identity_t<std::span<const S>> raw_obs, NormMode mode) {
  if (static_cast<int>(raw_obs.size()) != model.cfg.obs_dim) fail("tokenize: observation layout mismatch");
  if (mode == NormMode::Train) model.actor_norm.observe(raw_obs);
  std::vector<S> norm(raw_obs.size());
  model.actor_norm.normalize(raw_obs, norm);
  Tensor<S> h1(1, model.cfg.token_mlp_hidden);
  for (int j = 0; j < h1.cols(); ++j) {
    S acc = model.tok_b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < model.cfg.obs_dim; ++i) acc += norm[static_cast<std::size_t>(i)] * model.tok_w1(i, j);
    h1(0, j) = acc / (S{1} + std::exp(-acc));
  }
  Tensor<S> tok(1, model.cfg.hidden);
  for (int j = 0; j < tok.cols(); ++j) {
    S acc = model.tok_b2[static_cast<std::size_t>(j)];
    for (int i = 0; i < h1.cols(); ++i) acc += h1(0, i) * model.tok_w2(i, j);
    tok(0, j) = acc;
  }
  return tok;
}

/// Eager critic value for one raw clean+privileged vector.
template <std::floating_point S>
S critic_value(const PolicyModel<S>& model, std::type_identity_t<std::span<const S>> raw_critic_obs) {
  if (static_cast<int>(raw_critic_obs.size()) != model.cfg.critic_obs_dim)
    fail("critic_value: observation dim mismatch");
  std::vector<S> norm(raw_critic_obs.size());
  model.critic_norm.normalize(raw_critic_obs, norm);
  std::vector<S> h1(static_cast<std::size_t>(model.cfg.critic_hidden));
  for (int j = 0; j < model.cfg.critic_hidden; ++j) {
    S acc = model.v_b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < model.cfg.critic_obs_dim; ++i) acc += norm[static_cast<std::size_t>(i)] * model.v_w1(i, j);
    h1[static_cast<std::size_t>(j)] = acc / (S{1} + std::exp(-acc));
  }
  std::vector<S> h2(static_cast<std::size_t>(model.cfg.critic_hidden));
  for (int j = 0; j < model.cfg.critic_hidden; ++j) {
    S acc = model.v_b2[static_cast<std::size_t>(j)];
    for (int i = 0; i < model.cfg.critic_hidden; ++i) acc += h1[static_cast<std::size_t>(i)] * model.v_w2(i, j);
    h2[static_cast<std::size_t>(j)] = acc / (S{1} + std::exp(-acc));
  }
  S v = model.v_b3[0];
  for (int i = 0; i < model.cfg.critic_hidden; ++i) v += h2[static_cast<std::size_t>(i)] * model.v_w3(i, 0);
  return v;
}

/// Clamped per-joint standard deviation from the model's log-sigma vector.
template <std::floating_point S>
std::vector<S> action_sigma(const PolicyModel<S>& model) {
  std::vector<S> sig(static_cast<std::size_t>(model.cfg.action_dim));
  for (int j = 0; j < model.cfg.action_dim; ++j) {
    const S ls = std::clamp(model.log_sigma[static_cast<std::size_t>(j)],
                            static_cast<S>(model.cfg.log_sigma_min), static_cast<S>(model.cfg.log_sigma_max));
    sig[static_cast<std::size_t>(j)] = std::exp(ls);
  }
  return sig;
}

}  // namespace motrack::policy
