// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>
#include <sstream>

#include "motrack/trainer/adamw.hpp"
#include "motrack/trainer/rollout.hpp"

namespace motrack::trainer {

using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;
using policy::ParamVars;

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double lr = 3e-4;
  int epochs = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double lambda_vel = 1e-2;
  double lambda_contact = 1e-2;
  double lambda_ref = 1e-1;
  double lambda_robot = 1e-1;
  double lambda_dead = 1e-1;
  int segment_len = 32;  // T
  int num_envs = 8;      // B
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  bool normalize_advantages = true;

  void validate() const {
    if (gamma < 0.0 || gamma >= 1.0) fail("PPOConfig: gamma in [0,1)");
    if (clip_eps <= 0.0) fail("PPOConfig: clip_eps must be positive");
    if (epochs < 1 || segment_len < 1 || num_envs < 1) fail("PPOConfig: bad batch geometry");
    if (lr <= 0.0) fail("PPOConfig: bad learning rate");
  }
};

struct PassCounter {
  std::uint64_t passes = 0;
  std::uint64_t tokens = 0;
};

struct LossReport {
  double total = 0;
  double surrogate = 0;   // mean clipped surrogate (to be maximized)
  double value_loss = 0;  // mean squared error
  double entropy = 0;
  double l_vel = 0, l_contact = 0, l_ref = 0, l_robot = 0, l_dead = 0;
  double max_ratio_dev = 0;
  double clip_fraction = 0;
  int num_dead_experts = 0;
  std::vector<std::uint64_t> expert_token_counts;  // update batch, summed over layers
  std::uint64_t forward_passes = 0;

  std::string summary() const {
    std::ostringstream os;
    os << "total=" << total << " surr=" << surrogate << " value=" << value_loss
       << " entropy=" << entropy << " vel=" << l_vel << " contact=" << l_contact << " ref=" << l_ref
       << " robot=" << l_robot << " dead=" << l_dead;
    return os.str();
  }
};

template <std::floating_point S>
struct LossGraph {
  Var<S> total;
  Var<S> surrogate, value_loss, entropy, l_vel, l_contact, l_ref, l_robot, l_dead;
  LossReport report;
};

/// Recorded routing statistics of one MoE layer over an update batch.
template <std::floating_point S>
struct RouterStats {
  Tensor<S> scores;                    // [tokens x E] full score vectors
  std::vector<S> tau;                  // per-token k-th selected score
  std::vector<std::uint8_t> valid;     // per-token mask
  std::vector<std::uint64_t> counts;   // routed tokens per expert (valid only)
};

/// Dead-expert margin loss: mean over valid tokens and dead experts of
/// [tau - s]_+, averaged over layers. Experts with zero routed tokens in the
/// batch form the dead set.
template <std::floating_point S>
double dead_expert_loss(std::span<const RouterStats<S>> layers) {
  if (layers.empty()) fail("dead_expert_loss: no layers");
  double total = 0.0;
  for (const auto& layer : layers) {
    const int E = layer.scores.cols();
    std::vector<int> dead;
    for (int e = 0; e < E; ++e)
      if (layer.counts[static_cast<std::size_t>(e)] == 0) dead.push_back(e);
    std::uint64_t n_valid = 0;
    for (auto v : layer.valid) n_valid += v;
    if (dead.empty() || n_valid == 0) continue;
    double acc = 0.0;
    for (int t = 0; t < layer.scores.rows(); ++t) {
      if (!layer.valid[static_cast<std::size_t>(t)]) continue;
      const double tau = static_cast<double>(layer.tau[static_cast<std::size_t>(t)]);
      for (int e : dead) acc += std::max(0.0, tau - static_cast<double>(layer.scores(t, e)));
    }
    total += acc / (static_cast<double>(n_valid) * static_cast<double>(dead.size()));
  }
  return total / static_cast<double>(layers.size());
}

namespace detail {

template <std::floating_point S>
Tensor<S> rows_from(const std::vector<S>& flat, std::size_t base, int rows, int cols) {
  Tensor<S> t(rows, cols);
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(base), flat.begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(rows) * cols), t.data());
  return t;
}

template <std::floating_point S, typename U>
Tensor<S> col_from(const std::vector<U>& flat, std::size_t base, int rows) {
  Tensor<S> t(rows, 1);
  for (int i = 0; i < rows; ++i) t(i, 0) = static_cast<S>(flat[base + static_cast<std::size_t>(i)]);
  return t;
}

}  // namespace detail

/// Composes the full PPO objective over the batch in a single tape:
/// one causal forward pass per segment yields every per-step log-prob.
/// total = -surrogate + c_v * value_mse - c_e * entropy + sum(lambda_i L_i).
template <std::floating_point S>
LossGraph<S> build_ppo_loss(Tape<S>& tape, const ParamVars<S>& pv, const PolicyModel<S>& model,
                            const RolloutBatch<S>& batch, const PPOConfig& cfg,
                            PassCounter* passes = nullptr) {
  using namespace diffmath;
  const ModelConfig& mc = model.cfg;
  const int T = batch.T;
  const int J = batch.action_dim;
  const int N = batch.num_valid();
  if (N < 1) fail("build_ppo_loss: empty batch");
  const S invN = S{1} / static_cast<S>(N);

  std::vector<std::int64_t> positions(static_cast<std::size_t>(T));
  std::iota(positions.begin(), positions.end(), 0);

  Var<S> surr_sum, vloss_sum, vel_sum, con_sum, ref_sum, rob_sum;
  auto acc = [](Var<S>& a, const Var<S>& x) { a = a.valid() ? diffmath::add(a, x) : x; };

  struct LayerRec {
    std::vector<Var<S>> scores, tau;  // per segment
  };
  std::vector<LayerRec> layers(static_cast<std::size_t>(mc.blocks));
  std::vector<std::vector<std::uint64_t>> counts(
      static_cast<std::size_t>(mc.blocks), std::vector<std::uint64_t>(static_cast<std::size_t>(mc.experts), 0));
  std::vector<Tensor<S>> seg_masks;

  LossGraph<S> out;
  out.report.forward_passes = 0;
  double max_ratio_dev = 0.0;
  int clipped = 0;

  Var<S> sum_log_sigma, entropy;
  for (int b = 0; b < batch.B; ++b) {
    const auto base = batch.idx(b, 0);
    Tensor<S> raw = detail::rows_from(batch.actor_obs, base * batch.obs_dim, T, batch.obs_dim);
    Tensor<S> mask_t = detail::col_from<S>(batch.valid, base, T);
    seg_masks.push_back(mask_t);
    auto seq = policy::forward_sequence(tape, pv, mc, model.actor_norm.normalize_rows(raw), positions);
    out.report.forward_passes += 1;
    if (passes) {
      passes->passes += 1;
      passes->tokens += static_cast<std::uint64_t>(T);
    }

    if (b == 0) {
      sum_log_sigma = sum(seq.log_sigma_clamped);
      entropy = add_const(sum_log_sigma,
                          static_cast<S>(0.5 * J * (1.0 + std::log(2.0 * std::numbers::pi))));
      out.entropy = entropy;
    }

    Var<S> mask = tape.constant(mask_t);
    Var<S> actions = tape.constant(detail::rows_from(batch.actions, base * static_cast<std::size_t>(J), T, J));
    Var<S> adv = tape.constant(detail::col_from<S>(batch.advantages, base, T));
    Var<S> behavior = tape.constant(detail::col_from<S>(batch.behavior_logp, base, T));
    Var<S> returns = tape.constant(detail::col_from<S>(batch.returns, base, T));

    // per-step log-probs from the single causal pass
    Var<S> inv_sigma = exp_op(neg(seq.log_sigma_clamped));
    Var<S> z = mul_rowvec(sub(actions, seq.mu), inv_sigma);
    Var<S> quad = sum_cols(square(z));
    Var<S> ones = tape.constant(Tensor<S>::full(T, 1, S{1}));
    Var<S> logp = add_const(sub(scale(quad, S{-0.5}), mul_scalar(ones, sum_log_sigma)),
                            static_cast<S>(-0.5 * J * std::log(2.0 * std::numbers::pi)));

    Var<S> ratio = exp_op(sub(logp, behavior));
    Var<S> clipped_ratio = clamp(ratio, static_cast<S>(1.0 - cfg.clip_eps), static_cast<S>(1.0 + cfg.clip_eps));
    Var<S> surr = min_elem(mul(ratio, adv), mul(clipped_ratio, adv));
    acc(surr_sum, sum(mul(surr, mask)));

    for (int t = 0; t < T; ++t) {
      if (!batch.valid[batch.idx(b, t)]) continue;
      const double r = static_cast<double>(ratio.val()(t, 0));
      max_ratio_dev = std::max(max_ratio_dev, std::fabs(r - 1.0));
      if (std::fabs(r - 1.0) > cfg.clip_eps) ++clipped;
    }

    // critic recomputation and value regression
    Tensor<S> craw = detail::rows_from(batch.critic_obs, base * batch.critic_dim, T, batch.critic_dim);
    Var<S> values = policy::critic_forward(tape, pv, model.critic_norm.normalize_rows(craw));
    acc(vloss_sum, sum(mul(square(sub(values, returns)), mask)));

    // auxiliary losses on the pre-MoE representation
    Var<S> vel_tgt = tape.constant(detail::rows_from(batch.vel_target, base * batch.vel_dim, T, batch.vel_dim));
    Var<S> zv = div(sub(vel_tgt, seq.vel_mu), seq.vel_sigma);
    Var<S> vel_rows = scale(sum_cols(add(square(zv), scale(log_op(seq.vel_sigma), S{2}))), S{0.5});
    acc(vel_sum, sum(mul(vel_rows, mask)));

    Var<S> labels = tape.constant(detail::rows_from(
        [&] {
          std::vector<S> c(static_cast<std::size_t>(T) * batch.contact_dim);
          for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = static_cast<S>(batch.contact_target[base * batch.contact_dim + i]);
          return c;
        }(),
        0, T, batch.contact_dim));
    Var<S> logits = seq.contact_logits;
    // stable BCE with logits: relu(l) - l*c + log(1 + exp(-|l|))
    Var<S> bce = add(sub(relu(logits), mul(logits, labels)),
                     log_op(add_const(exp_op(neg(abs_op(logits))), S{1})));
    acc(con_sum, sum(mul(sum_cols(bce), mask)));

    Var<S> ref_tgt = tape.constant(detail::rows_from(batch.refpos_target, base * batch.keypos_dim, T, batch.keypos_dim));
    acc(ref_sum, sum(mul(sum_cols(square(sub(seq.ref_pos, ref_tgt))), mask)));
    Var<S> rob_tgt = tape.constant(detail::rows_from(batch.robpos_target, base * batch.keypos_dim, T, batch.keypos_dim));
    acc(rob_sum, sum(mul(sum_cols(square(sub(seq.robot_pos, rob_tgt))), mask)));

    // routing records for the dead-expert loss
    for (int l = 0; l < mc.blocks; ++l) {
      layers[static_cast<std::size_t>(l)].scores.push_back(seq.routing[static_cast<std::size_t>(l)].scores);
      layers[static_cast<std::size_t>(l)].tau.push_back(seq.routing[static_cast<std::size_t>(l)].tau);
      for (int t = 0; t < T; ++t) {
        if (!batch.valid[batch.idx(b, t)]) continue;
        for (int e : seq.routing[static_cast<std::size_t>(l)].decisions[static_cast<std::size_t>(t)].experts)
          counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)] += 1;
      }
    }
  }

  // dead-expert margin loss, averaged over MoE layers
  Var<S> dead_total;
  int dead_experts = 0;
  out.report.expert_token_counts.assign(static_cast<std::size_t>(mc.experts), 0);
  for (int l = 0; l < mc.blocks; ++l) {
    Tensor<S> dead_mask(1, mc.experts);
    int num_dead = 0;
    for (int e = 0; e < mc.experts; ++e) {
      out.report.expert_token_counts[static_cast<std::size_t>(e)] += counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)];
      if (counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)] == 0) {
        dead_mask(0, e) = S{1};
        ++num_dead;
      }
    }
    dead_experts += num_dead;
    Var<S> layer_loss;
    if (num_dead == 0) {
      layer_loss = tape.constant(Tensor<S>(1, 1));
    } else {
      Var<S> hinge_sum;
      for (int b = 0; b < batch.B; ++b) {
        auto& rec = layers[static_cast<std::size_t>(l)];
        Var<S> diff = sub(broadcast_col(rec.tau[static_cast<std::size_t>(b)], mc.experts),
                          rec.scores[static_cast<std::size_t>(b)]);
        Var<S> hinged = mul_rowvec(relu(diff), tape.constant(dead_mask));
        Var<S> mask_col = tape.constant(seg_masks[static_cast<std::size_t>(b)]);
        acc(hinge_sum, sum(mul(hinged, broadcast_col(mask_col, mc.experts))));
      }
      layer_loss = scale(hinge_sum, S{1} / (static_cast<S>(N) * static_cast<S>(num_dead)));
    }
    acc(dead_total, layer_loss);
  }
  out.l_dead = scale(dead_total, S{1} / static_cast<S>(mc.blocks));
  out.report.num_dead_experts = dead_experts;

  out.surrogate = scale(surr_sum, invN);
  out.value_loss = scale(vloss_sum, invN);
  out.l_vel = scale(vel_sum, invN);
  out.l_contact = scale(con_sum, invN / static_cast<S>(batch.contact_dim));
  out.l_ref = scale(ref_sum, invN / static_cast<S>(batch.keypos_dim));
  out.l_robot = scale(rob_sum, invN / static_cast<S>(batch.keypos_dim));

  Var<S> total = scale(out.surrogate, S{-1});
  total = add(total, scale(out.value_loss, static_cast<S>(cfg.value_coef)));
  total = add(total, scale(out.entropy, static_cast<S>(-cfg.entropy_coef)));
  total = add(total, scale(out.l_vel, static_cast<S>(cfg.lambda_vel)));
  total = add(total, scale(out.l_contact, static_cast<S>(cfg.lambda_contact)));
  total = add(total, scale(out.l_ref, static_cast<S>(cfg.lambda_ref)));
  total = add(total, scale(out.l_robot, static_cast<S>(cfg.lambda_robot)));
  total = add(total, scale(out.l_dead, static_cast<S>(cfg.lambda_dead)));
  out.total = total;

  out.report.total = static_cast<double>(out.total.val().item());
  out.report.surrogate = static_cast<double>(out.surrogate.val().item());
  out.report.value_loss = static_cast<double>(out.value_loss.val().item());
  out.report.entropy = static_cast<double>(out.entropy.val().item());
  out.report.l_vel = static_cast<double>(out.l_vel.val().item());
  out.report.l_contact = static_cast<double>(out.l_contact.val().item());
  out.report.l_ref = static_cast<double>(out.l_ref.val().item());
  out.report.l_robot = static_cast<double>(out.l_robot.val().item());
  out.report.l_dead = static_cast<double>(out.l_dead.val().item());
  out.report.max_ratio_dev = max_ratio_dev;
  out.report.clip_fraction = static_cast<double>(clipped) / static_cast<double>(N);
  return out;
}

/// One optimization epoch: a single batched causal pass per segment computes
/// every per-step log-prob, then one gradient step. Aborts with diagnostics
/// on a non-finite loss.
template <std::floating_point S>
LossReport sequence_ppo_update(PolicyModel<S>& model, AdamW<S>& opt, const RolloutBatch<S>& batch,
                               const PPOConfig& cfg, PassCounter* passes = nullptr) {
  if (batch.advantages.empty()) fail("sequence_ppo_update: run compute_gae first");
  Tape<S> tape;
  auto pv = ParamVars<S>::bind(tape, model, true);
  auto loss = build_ppo_loss(tape, pv, model, batch, cfg, passes);
  if (!std::isfinite(loss.report.total))
    fail("sequence_ppo_update: non-finite loss; components: " + loss.report.summary());
  tape.backward(loss.total);
  opt.step(model, tape, pv);
  return loss.report;
}

// ---------------------------------------------------------------------------
// sliding-window step-level oracle (the baseline the sequence path replaces)
// ---------------------------------------------------------------------------

/// Recomputes every step's log-prob with a per-step causal pass over the
/// last min(t+1, C) observations of its segment. B*T passes in total.
template <std::floating_point S>
std::vector<S> steplevel_logprobs(const PolicyModel<S>& model, const RolloutBatch<S>& batch,
                                  PassCounter* passes = nullptr) {
  const ModelConfig& mc = model.cfg;
  const int T = batch.T;
  std::vector<S> out(static_cast<std::size_t>(batch.B) * T, S{0});
  const auto sigma = policy::action_sigma(model);
  for (int b = 0; b < batch.B; ++b) {
    for (int t = 0; t < T; ++t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) continue;
      const int w0 = std::max(0, t - mc.context + 1);
      const int W = t - w0 + 1;
      Tensor<S> raw(W, batch.obs_dim);
      std::vector<std::int64_t> positions(static_cast<std::size_t>(W));
      for (int i = 0; i < W; ++i) {
        positions[static_cast<std::size_t>(i)] = w0 + i;
        const auto src = batch.idx(b, w0 + i);
        for (int c = 0; c < batch.obs_dim; ++c)
          raw(i, c) = batch.actor_obs[src * batch.obs_dim + c];
      }
      Tape<S> tape(false);
      auto pv = ParamVars<S>::bind(tape, model, false);
      auto seq = policy::forward_sequence(tape, pv, mc, model.actor_norm.normalize_rows(raw), positions);
      if (passes) {
        passes->passes += 1;
        passes->tokens += static_cast<std::uint64_t>(W);
      }
      std::vector<S> mu(static_cast<std::size_t>(batch.action_dim));
      for (int j = 0; j < batch.action_dim; ++j) mu[static_cast<std::size_t>(j)] = seq.mu.val()(W - 1, j);
      std::span<const S> act(batch.actions.data() + at * batch.action_dim,
                             static_cast<std::size_t>(batch.action_dim));
      out[at] = policy::gaussian_log_prob<S>(act, mu, sigma);
    }
  }
  return out;
}

/// Full step-level PPO epoch: per-(b,t) window recomputation with backward,
/// gradients accumulated across steps, dead-expert term added from a final
/// router-only pass, then one optimizer step. This is the redundant-compute
/// baseline benchmarked against sequence_ppo_update.
template <std::floating_point S>
LossReport steplevel_update(PolicyModel<S>& model, AdamW<S>& opt, const RolloutBatch<S>& batch,
                            const PPOConfig& cfg, PassCounter* passes = nullptr) {
  using namespace diffmath;
  if (batch.advantages.empty()) fail("steplevel_update: run compute_gae first");
  const ModelConfig& mc = model.cfg;
  const int T = batch.T;
  const int J = batch.action_dim;
  const int N = batch.num_valid();
  const S invN = S{1} / static_cast<S>(N);

  std::vector<Tensor<S>> grads;
  model.visit_params([&](const std::string&, Tensor<S>& p) { grads.emplace_back(p.rows(), p.cols()); });
  auto accumulate_grads = [&](Tape<S>& tape, const ParamVars<S>& pv) {
    for (std::size_t k = 0; k < pv.ordered.size(); ++k) {
      const auto& g = tape.grad_of(pv.ordered[k].id);
      if (g.empty()) continue;
      for (std::size_t i = 0; i < g.numel(); ++i) grads[k][i] += g[i];
    }
  };

  LossReport report;
  std::vector<std::vector<std::uint64_t>> counts(
      static_cast<std::size_t>(mc.blocks), std::vector<std::uint64_t>(static_cast<std::size_t>(mc.experts), 0));

  for (int b = 0; b < batch.B; ++b) {
    for (int t = 0; t < T; ++t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) continue;
      const int w0 = std::max(0, t - mc.context + 1);
      const int W = t - w0 + 1;
      Tensor<S> raw(W, batch.obs_dim);
      std::vector<std::int64_t> positions(static_cast<std::size_t>(W));
      for (int i = 0; i < W; ++i) {
        positions[static_cast<std::size_t>(i)] = w0 + i;
        const auto src = batch.idx(b, w0 + i);
        for (int c = 0; c < batch.obs_dim; ++c) raw(i, c) = batch.actor_obs[src * batch.obs_dim + c];
      }
      Tape<S> tape;
      auto pv = ParamVars<S>::bind(tape, model, true);
      auto seq = policy::forward_sequence(tape, pv, mc, model.actor_norm.normalize_rows(raw), positions);
      if (passes) {
        passes->passes += 1;
        passes->tokens += static_cast<std::uint64_t>(W);
      }
      for (int l = 0; l < mc.blocks; ++l)
        for (int e : seq.routing[static_cast<std::size_t>(l)].decisions[static_cast<std::size_t>(W - 1)].experts)
          counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)] += 1;

      Var<S> mu_t = row(seq.mu, W - 1);
      Var<S> action = tape.constant(detail::rows_from(batch.actions, at * static_cast<std::size_t>(J), 1, J));
      Var<S> inv_sigma = exp_op(neg(seq.log_sigma_clamped));
      Var<S> zrow = mul_rowvec(sub(action, mu_t), inv_sigma);
      Var<S> logp = add_const(sub(scale(sum(square(zrow)), S{-0.5}), sum(seq.log_sigma_clamped)),
                              static_cast<S>(-0.5 * J * std::log(2.0 * std::numbers::pi)));
      const S adv = batch.advantages[at];
      Var<S> ratio = exp_op(add_const(logp, -batch.behavior_logp[at]));
      Var<S> surr = min_elem(scale(ratio, adv),
                             scale(clamp(ratio, static_cast<S>(1.0 - cfg.clip_eps), static_cast<S>(1.0 + cfg.clip_eps)), adv));
      report.surrogate += static_cast<double>(surr.val().item()) * static_cast<double>(invN);

      Tensor<S> craw = detail::rows_from(batch.critic_obs, at * batch.critic_dim, 1, batch.critic_dim);
      Var<S> value = policy::critic_forward(tape, pv, model.critic_norm.normalize_rows(craw));
      Var<S> verr = square(add_const(value, -batch.returns[at]));
      report.value_loss += static_cast<double>(verr.val().item()) * static_cast<double>(invN);

      Var<S> vel_tgt = tape.constant(detail::rows_from(batch.vel_target, at * static_cast<std::size_t>(batch.vel_dim), 1, batch.vel_dim));
      Var<S> vel_mu = row(seq.vel_mu, W - 1);
      Var<S> vel_sig = row(seq.vel_sigma, W - 1);
      Var<S> zv = div(sub(vel_tgt, vel_mu), vel_sig);
      Var<S> lvel = scale(sum(add(square(zv), scale(log_op(vel_sig), S{2}))), S{0.5});
      report.l_vel += static_cast<double>(lvel.val().item()) * static_cast<double>(invN);

      Var<S> logits = row(seq.contact_logits, W - 1);
      Tensor<S> ltgt(1, batch.contact_dim);
      for (int c = 0; c < batch.contact_dim; ++c)
        ltgt(0, c) = static_cast<S>(batch.contact_target[at * batch.contact_dim + c]);
      Var<S> labels = tape.constant(ltgt);
      Var<S> bce = sum(add(sub(relu(logits), mul(logits, labels)),
                           log_op(add_const(exp_op(neg(abs_op(logits))), S{1}))));
      report.l_contact += static_cast<double>(bce.val().item()) * static_cast<double>(invN) / batch.contact_dim;

      Var<S> ref_tgt = tape.constant(detail::rows_from(batch.refpos_target, at * static_cast<std::size_t>(batch.keypos_dim), 1, batch.keypos_dim));
      Var<S> lref = sum(square(sub(row(seq.ref_pos, W - 1), ref_tgt)));
      report.l_ref += static_cast<double>(lref.val().item()) * static_cast<double>(invN) / batch.keypos_dim;
      Var<S> rob_tgt = tape.constant(detail::rows_from(batch.robpos_target, at * static_cast<std::size_t>(batch.keypos_dim), 1, batch.keypos_dim));
      Var<S> lrob = sum(square(sub(row(seq.robot_pos, W - 1), rob_tgt)));
      report.l_robot += static_cast<double>(lrob.val().item()) * static_cast<double>(invN) / batch.keypos_dim;

      Var<S> entropy = add_const(sum(seq.log_sigma_clamped),
                                 static_cast<S>(0.5 * J * (1.0 + std::log(2.0 * std::numbers::pi))));
      if (b == 0 && t == 0) report.entropy = static_cast<double>(entropy.val().item());

      Var<S> step_loss = scale(surr, -invN);
      step_loss = add(step_loss, scale(verr, static_cast<S>(cfg.value_coef) * invN));
      step_loss = add(step_loss, scale(entropy, static_cast<S>(-cfg.entropy_coef) * invN));
      step_loss = add(step_loss, scale(lvel, static_cast<S>(cfg.lambda_vel) * invN));
      step_loss = add(step_loss, scale(bce, static_cast<S>(cfg.lambda_contact) * invN / static_cast<S>(batch.contact_dim)));
      step_loss = add(step_loss, scale(lref, static_cast<S>(cfg.lambda_ref) * invN / static_cast<S>(batch.keypos_dim)));
      step_loss = add(step_loss, scale(lrob, static_cast<S>(cfg.lambda_robot) * invN / static_cast<S>(batch.keypos_dim)));
      tape.backward(step_loss);
      accumulate_grads(tape, pv);
    }
  }

  // dead-expert term from a router-only pass over all segments
  {
    Tape<S> tape;
    auto pv = ParamVars<S>::bind(tape, model, true);
    Var<S> dead_total;
    int dead_experts = 0;
    report.expert_token_counts.assign(static_cast<std::size_t>(mc.experts), 0);
    for (int l = 0; l < mc.blocks; ++l) {
      Tensor<S> dead_mask(1, mc.experts);
      int num_dead = 0;
      for (int e = 0; e < mc.experts; ++e) {
        report.expert_token_counts[static_cast<std::size_t>(e)] += counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)];
        if (counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(e)] == 0) {
          dead_mask(0, e) = S{1};
          ++num_dead;
        }
      }
      dead_experts += num_dead;
      if (num_dead == 0) continue;
      Var<S> layer_sum;
      for (int b = 0; b < batch.B; ++b) {
        const auto base = batch.idx(b, 0);
        Tensor<S> raw = detail::rows_from(batch.actor_obs, base * batch.obs_dim, T, batch.obs_dim);
        Tensor<S> norm = model.actor_norm.normalize_rows(raw);
        Tensor<S> ref_feats(T, mc.ref_dim);
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < mc.ref_dim; ++c) ref_feats(t, c) = norm(t, mc.obs_dim - mc.ref_dim + c);
        Var<S> scores = add_bias(matmul(tape.constant(ref_feats), pv.blocks[static_cast<std::size_t>(l)].router_w),
                                 pv.blocks[static_cast<std::size_t>(l)].router_b);
        std::vector<Var<S>> taus;
        for (int t = 0; t < T; ++t) {
          Var<S> srow = row(scores, t);
          auto sel = policy::topk_select(srow.val().data(), mc.experts, mc.top_k);
          taus.push_back(select_cols(srow, {sel.back()}));
        }
        Var<S> tau = stack_rows(std::span<const Var<S>>(taus));
        Var<S> hinged = mul_rowvec(relu(sub(broadcast_col(tau, mc.experts), scores)), tape.constant(dead_mask));
        Var<S> mask_col = tape.constant(detail::col_from<S>(batch.valid, base, T));
        Var<S> seg = sum(mul(hinged, broadcast_col(mask_col, mc.experts)));
        layer_sum = layer_sum.valid() ? add(layer_sum, seg) : seg;
      }
      Var<S> layer_loss = scale(layer_sum, S{1} / (static_cast<S>(N) * static_cast<S>(num_dead)));
      dead_total = dead_total.valid() ? add(dead_total, layer_loss) : layer_loss;
    }
    report.num_dead_experts = dead_experts;
    if (dead_total.valid()) {
      Var<S> dead_mean = scale(dead_total, S{1} / static_cast<S>(mc.blocks));
      report.l_dead = static_cast<double>(dead_mean.val().item());
      tape.backward(scale(dead_mean, static_cast<S>(cfg.lambda_dead)));
      accumulate_grads(tape, pv);
    }
  }

  report.total = -report.surrogate + cfg.value_coef * report.value_loss - cfg.entropy_coef * report.entropy +
                 cfg.lambda_vel * report.l_vel + cfg.lambda_contact * report.l_contact +
                 cfg.lambda_ref * report.l_ref + cfg.lambda_robot * report.l_robot +
                 cfg.lambda_dead * report.l_dead;
  if (!std::isfinite(report.total)) fail("steplevel_update: non-finite loss; components: " + report.summary());
  opt.step_with_grads(model, grads);
  return report;
}

}  // namespace motrack::trainer
