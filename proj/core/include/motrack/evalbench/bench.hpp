// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>

#include "motrack/trainer/ppo.hpp"

namespace motrack::evalbench {

using trainer::PassCounter;
using trainer::PPOConfig;
using trainer::RolloutBatch;

struct InferenceBench {
  double cached_us_per_step = 0.0;
  double recompute_us_per_step = 0.0;
  double speedup = 0.0;
  std::uint64_t cached_flops_per_step = 0;  // multiply-accumulates, counted
  double cached_tokens_per_step = 1.0;
  double recompute_tokens_per_step = 0.0;
};

/// Steady-state per-step latency: ring-buffer cached step vs a full forward
/// over the last C tokens. Measured after the window fills.
template <std::floating_point S>
InferenceBench bench_inference(PolicyModel<S>& model, int n_steps, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const auto& cfg = model.cfg;
  Rng rng(seed);
  const int total = cfg.context + n_steps;
  std::vector<std::vector<S>> stream(static_cast<std::size_t>(total),
                                     std::vector<S>(static_cast<std::size_t>(cfg.obs_dim)));
  for (auto& row : stream)
    for (auto& v : row) v = static_cast<S>(uniform(rng, -1, 1));

  InferenceBench out;
  // cached route
  {
    kvruntime::KVCache<S> cache(cfg);
    kvruntime::InferenceContext<S> ctx(cfg);
    for (int t = 0; t < cfg.context; ++t) ctx.step(model, cache, stream[static_cast<std::size_t>(t)], policy::NormMode::Eval);
    diffmath::kernels::OpCounter ctr;
    const auto t0 = clock::now();
    for (int t = cfg.context; t < total; ++t)
      ctx.step(model, cache, stream[static_cast<std::size_t>(t)], policy::NormMode::Eval, &ctr);
    const auto t1 = clock::now();
    out.cached_us_per_step = std::chrono::duration<double, std::micro>(t1 - t0).count() / n_steps;
    out.cached_flops_per_step = ctr.flops / static_cast<std::uint64_t>(n_steps);
  }
  // full-window recompute route
  {
    std::vector<std::int64_t> positions(static_cast<std::size_t>(cfg.context));
    diffmath::Tensor<S> raw(cfg.context, cfg.obs_dim);
    const auto t0 = clock::now();
    for (int t = cfg.context; t < total; ++t) {
      const int w0 = t - cfg.context + 1;
      for (int i = 0; i < cfg.context; ++i) {
        positions[static_cast<std::size_t>(i)] = w0 + i;
        for (int c = 0; c < cfg.obs_dim; ++c) raw(i, c) = stream[static_cast<std::size_t>(w0 + i)][static_cast<std::size_t>(c)];
      }
      diffmath::Tape<S> tape(false);
      auto pv = policy::ParamVars<S>::bind(tape, model, false);
      auto seq = policy::forward_sequence(tape, pv, cfg, model.actor_norm.normalize_rows(raw), positions);
      (void)seq;
    }
    const auto t1 = clock::now();
    out.recompute_us_per_step = std::chrono::duration<double, std::micro>(t1 - t0).count() / n_steps;
  }
  out.recompute_tokens_per_step = static_cast<double>(cfg.context);
  out.speedup = out.recompute_us_per_step / std::max(1e-9, out.cached_us_per_step);
  return out;
}

struct TrainingBench {
  double sequence_seconds = 0.0;
  double steplevel_seconds = 0.0;
  double speedup = 0.0;
  std::uint64_t sequence_passes = 0, steplevel_passes = 0;
  std::uint64_t sequence_tokens = 0, steplevel_tokens = 0;
};

/// Synthetic on-policy batch with ratio-one behavior log-probs; used to time
/// updates without an environment in the loop.
template <std::floating_point S>
RolloutBatch<S> synthetic_batch(PolicyModel<S>& model, int B, int T, std::uint64_t seed) {
  RolloutBatch<S> batch;
  batch.allocate(B, T, model.cfg);
  Rng rng(seed);
  for (auto& v : batch.actor_obs) v = static_cast<S>(uniform(rng, -1, 1));
  for (auto& v : batch.critic_obs) v = static_cast<S>(uniform(rng, -1, 1));
  for (auto& v : batch.actions) v = static_cast<S>(gaussian(rng, 0.0, 0.5));
  for (auto& v : batch.vel_target) v = static_cast<S>(gaussian(rng, 0.0, 0.5));
  for (auto& v : batch.contact_target) v = uniform(rng, 0, 1) < 0.5 ? 0 : 1;
  for (auto& v : batch.refpos_target) v = static_cast<S>(gaussian(rng, 0.0, 0.3));
  for (auto& v : batch.robpos_target) v = static_cast<S>(gaussian(rng, 0.0, 0.3));
  std::fill(batch.valid.begin(), batch.valid.end(), 1);
  batch.advantages.resize(batch.valid.size());
  batch.returns.resize(batch.valid.size());
  for (auto& v : batch.advantages) v = static_cast<S>(gaussian(rng));
  for (auto& v : batch.returns) v = static_cast<S>(gaussian(rng));
  for (auto& v : batch.values) v = static_cast<S>(gaussian(rng, 0.0, 0.1));

  // behavior log-probs from a batched pass so the first epoch sits at ratio 1
  const auto sigma = policy::action_sigma(model);
  std::vector<std::int64_t> positions(static_cast<std::size_t>(T));
  std::iota(positions.begin(), positions.end(), 0);
  for (int b = 0; b < B; ++b) {
    diffmath::Tensor<S> raw(T, batch.obs_dim);
    std::copy(batch.actor_obs.begin() + static_cast<std::ptrdiff_t>(batch.idx(b, 0) * batch.obs_dim),
              batch.actor_obs.begin() + static_cast<std::ptrdiff_t>((batch.idx(b, 0) + static_cast<std::size_t>(T)) * batch.obs_dim),
              raw.data());
    diffmath::Tape<S> tape(false);
    auto pv = policy::ParamVars<S>::bind(tape, model, false);
    auto seq = policy::forward_sequence(tape, pv, model.cfg, model.actor_norm.normalize_rows(raw), positions);
    for (int t = 0; t < T; ++t) {
      std::vector<S> mu(static_cast<std::size_t>(batch.action_dim));
      for (int j = 0; j < batch.action_dim; ++j) mu[static_cast<std::size_t>(j)] = seq.mu.val()(t, j);
      std::span<const S> act(batch.actions.data() + batch.idx(b, t) * batch.action_dim,
                             static_cast<std::size_t>(batch.action_dim));
      batch.behavior_logp[batch.idx(b, t)] = policy::gaussian_log_prob<S>(act, mu, sigma);
    }
  }
  return batch;
}

/// One optimization epoch, sequence-level vs the sliding-window step-level
/// oracle, on identical data and objective. Each route updates its own copy
/// of the model.
template <std::floating_point S>
TrainingBench bench_training(const PolicyModel<S>& model, int B, int T, std::uint64_t seed, int reps = 2) {
  using clock = std::chrono::steady_clock;
  PPOConfig cfg;
  cfg.num_envs = B;
  cfg.segment_len = T;
  TrainingBench out;
  out.sequence_seconds = 1e300;
  out.steplevel_seconds = 1e300;
  for (int r = 0; r < reps; ++r) {
    {
      PolicyModel<S> m = model;
      auto batch = synthetic_batch(m, B, T, seed);
      trainer::AdamW<S> opt(m, cfg.lr);
      PassCounter passes;
      const auto t0 = clock::now();
      trainer::sequence_ppo_update(m, opt, batch, cfg, &passes);
      const auto t1 = clock::now();
      out.sequence_seconds = std::min(out.sequence_seconds, std::chrono::duration<double>(t1 - t0).count());
      out.sequence_passes = passes.passes;
      out.sequence_tokens = passes.tokens;
    }
    {
      PolicyModel<S> m = model;
      auto batch = synthetic_batch(m, B, T, seed);
      trainer::AdamW<S> opt(m, cfg.lr);
      PassCounter passes;
      const auto t0 = clock::now();
      trainer::steplevel_update(m, opt, batch, cfg, &passes);
      const auto t1 = clock::now();
      out.steplevel_seconds = std::min(out.steplevel_seconds, std::chrono::duration<double>(t1 - t0).count());
      out.steplevel_passes = passes.passes;
      out.steplevel_tokens = passes.tokens;
    }
  }
  out.speedup = out.steplevel_seconds / std::max(1e-12, out.sequence_seconds);
  return out;
}

}  // namespace motrack::evalbench
