// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <thread>

#include "motrack/kvruntime/kv_cache.hpp"
#include "motrack/policy/gaussian.hpp"
#include "motrack/simenv/env.hpp"

namespace motrack::trainer {

using kvruntime::InferenceContext;
using kvruntime::KVCache;
using policy::ModelConfig;
using policy::PolicyModel;

/// Contiguous [B environments x T steps] on-policy segments plus the
/// auxiliary supervision targets captured from the clean simulator state.
/// Masked entries (valid == 0) are excluded from every loss mean.
template <std::floating_point S>
struct RolloutBatch {
  int B = 0, T = 0;
  int obs_dim = 0, critic_dim = 0, action_dim = 0, contact_dim = 0, keypos_dim = 0, vel_dim = 3;

  std::vector<S> actor_obs;    // B*T*obs_dim, raw noisy observations
  std::vector<S> critic_obs;   // B*T*critic_dim, raw clean + privileged
  std::vector<S> actions;      // B*T*action_dim
  std::vector<S> behavior_logp;  // B*T
  std::vector<S> rewards;        // B*T
  std::vector<S> values;         // B*T
  std::vector<std::uint8_t> dones;  // B*T
  std::vector<std::uint8_t> valid;  // B*T
  std::vector<S> bootstrap_value;   // B

  std::vector<S> vel_target;                 // B*T*vel_dim
  std::vector<std::uint8_t> contact_target;  // B*T*contact_dim
  std::vector<S> refpos_target;              // B*T*keypos_dim
  std::vector<S> robpos_target;              // B*T*keypos_dim

  // filled by compute_gae
  std::vector<S> advantages, returns;

  // rollout-side router utilization (first block), for the metrics log
  std::vector<std::uint64_t> router_counts;

  // episodes that finished during this segment
  std::vector<double> episode_returns;
  std::vector<int> episode_lengths;
  std::vector<std::string> episode_reasons;

  std::size_t idx(int b, int t) const { return static_cast<std::size_t>(b) * T + t; }

  void allocate(int B_, int T_, const ModelConfig& cfg) {
    B = B_;
    T = T_;
    obs_dim = cfg.obs_dim;
    critic_dim = cfg.critic_obs_dim;
    action_dim = cfg.action_dim;
    contact_dim = cfg.contact_dim;
    keypos_dim = cfg.keypos_dim;
    vel_dim = cfg.vel_dim;
    const auto n = static_cast<std::size_t>(B) * T;
    actor_obs.assign(n * obs_dim, S{0});
    critic_obs.assign(n * critic_dim, S{0});
    actions.assign(n * action_dim, S{0});
    behavior_logp.assign(n, S{0});
    rewards.assign(n, S{0});
    values.assign(n, S{0});
    dones.assign(n, 0);
    valid.assign(n, 0);
    bootstrap_value.assign(static_cast<std::size_t>(B), S{0});
    vel_target.assign(n * vel_dim, S{0});
    contact_target.assign(n * contact_dim, 0);
    refpos_target.assign(n * keypos_dim, S{0});
    robpos_target.assign(n * keypos_dim, S{0});
    advantages.clear();
    returns.clear();
  }

  int num_valid() const {
    int n = 0;
    for (auto v : valid) n += v;
    return n;
  }

  void validate() const {
    if (B < 1 || T < 1) fail("RolloutBatch: empty");
    if (num_valid() < 1) fail("RolloutBatch: no valid transitions");
  }
};

/// Owns the per-environment caches, inference scratch and action RNG streams,
/// and keeps per-env episode accounting across segments. Episodes persist
/// across segment boundaries; each cache is cleared at segment start so the
/// behavior policy is conditioned exactly on the segment-truncated context
/// that the update pass recomputes.
template <std::floating_point S>
class RolloutCollector {
 public:
  RolloutCollector(simenv::VecEnv& envs, const ModelConfig& cfg, std::uint64_t seed, int threads = 1)
      : envs_(envs), cfg_(cfg), threads_(std::max(1, threads)) {
    const int B = envs.size();
    caches_.assign(static_cast<std::size_t>(B), KVCache<S>(cfg));
    for (int b = 0; b < B; ++b) {
      ctxs_.emplace_back(cfg);
      rngs_.emplace_back(derive_seed(seed, 0x0acce55, static_cast<std::uint64_t>(b)));
    }
    current_.resize(static_cast<std::size_t>(B));
    failed_.assign(static_cast<std::size_t>(B), 0);
    run_return_.assign(static_cast<std::size_t>(B), 0.0);
    run_len_.assign(static_cast<std::size_t>(B), 0);
    per_env_records_.resize(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) current_[static_cast<std::size_t>(b)] = envs_.env(b).reset();
  }

  /// Collects one [B x T] segment. Env failures are recorded per environment
  /// without aborting the batch; the failed env's remaining steps are masked.
  RolloutBatch<S> collect(PolicyModel<S>& model, int T, bool auto_reset = true) {
    RolloutBatch<S> batch;
    batch.allocate(envs_.size(), T, cfg_);
    batch.router_counts.assign(static_cast<std::size_t>(cfg_.experts), 0);

    auto worker = [&](int b_begin, int b_end) {
      for (int b = b_begin; b < b_end; ++b) collect_env(model, batch, b, T, auto_reset);
    };
    if (threads_ == 1 || envs_.size() == 1) {
      worker(0, envs_.size());
    } else {
      std::vector<std::thread> pool;
      const int per = (envs_.size() + threads_ - 1) / threads_;
      for (int w = 0; w < threads_; ++w) {
        const int b0 = w * per;
        const int b1 = std::min(envs_.size(), b0 + per);
        if (b0 < b1) pool.emplace_back(worker, b0, b1);
      }
      for (auto& th : pool) th.join();
    }

    // merge per-env episode records and router counts in env order
    for (int b = 0; b < envs_.size(); ++b) {
      auto& per = per_env_records_[static_cast<std::size_t>(b)];
      for (auto& e : per.returns) batch.episode_returns.push_back(e);
      for (auto& e : per.lengths) batch.episode_lengths.push_back(e);
      for (auto& e : per.reasons) batch.episode_reasons.push_back(e);
      for (std::size_t i = 0; i < per.router.size(); ++i) batch.router_counts[i] += per.router[i];
      per = PerEnvRecords{};
      per.router.assign(static_cast<std::size_t>(cfg_.experts), 0);
    }
    for (double r : batch.episode_returns) {
      recent_returns_.push_back(r);
      if (recent_returns_.size() > 100) recent_returns_.pop_front();
    }
    batch.validate();
    return batch;
  }

  double recent_return_mean() const {
    if (recent_returns_.empty()) return 0.0;
    double acc = 0;
    for (double r : recent_returns_) acc += r;
    return acc / static_cast<double>(recent_returns_.size());
  }

  const std::vector<std::uint8_t>& failed() const { return failed_; }

 private:
  struct PerEnvRecords {
    std::vector<double> returns;
    std::vector<int> lengths;
    std::vector<std::string> reasons;
    std::vector<std::uint64_t> router;
  };

  void collect_env(PolicyModel<S>& model, RolloutBatch<S>& batch, int b, int T, bool auto_reset) {
    auto& records = per_env_records_[static_cast<std::size_t>(b)];
    if (records.router.empty()) records.router.assign(static_cast<std::size_t>(cfg_.experts), 0);
    if (failed_[static_cast<std::size_t>(b)]) return;
    auto& env = envs_.env(b);
    auto& cache = caches_[static_cast<std::size_t>(b)];
    auto& ctx = ctxs_[static_cast<std::size_t>(b)];
    auto& rng = rngs_[static_cast<std::size_t>(b)];

    cache.clear();  // segment-truncated context, matching the update pass
    bool stopped = false;
    for (int t = 0; t < T; ++t) {
      const auto at = batch.idx(b, t);
      if (stopped) break;
      try {
        const auto& obs = current_[static_cast<std::size_t>(b)];
        for (int i = 0; i < batch.obs_dim; ++i)
          batch.actor_obs[at * batch.obs_dim + i] = static_cast<S>(obs.actor[static_cast<std::size_t>(i)]);
        for (int i = 0; i < batch.critic_dim; ++i)
          batch.critic_obs[at * batch.critic_dim + i] = static_cast<S>(obs.critic[static_cast<std::size_t>(i)]);

        const auto aux = env.aux_targets();
        for (int i = 0; i < batch.vel_dim; ++i)
          batch.vel_target[at * batch.vel_dim + i] = static_cast<S>(aux.root_lin_vel[static_cast<std::size_t>(i)]);
        for (int i = 0; i < batch.contact_dim; ++i)
          batch.contact_target[at * batch.contact_dim + i] = aux.contacts[static_cast<std::size_t>(i)];
        for (int i = 0; i < batch.keypos_dim; ++i) {
          batch.refpos_target[at * batch.keypos_dim + i] = static_cast<S>(aux.ref_keypos_rel[static_cast<std::size_t>(i)]);
          batch.robpos_target[at * batch.keypos_dim + i] = static_cast<S>(aux.robot_keypos_rel[static_cast<std::size_t>(i)]);
        }

        std::span<const S> actor_row(batch.actor_obs.data() + at * batch.obs_dim,
                                     static_cast<std::size_t>(batch.obs_dim));
        const auto& out = ctx.step(model, cache, actor_row, policy::NormMode::Train);
        for (int e : out.routing[0].experts) records.router[static_cast<std::size_t>(e)] += 1;

        const auto action = policy::sample_action<S>(out.mu, out.sigma, rng);
        const S logp = policy::gaussian_log_prob<S>(action, out.mu, out.sigma);
        std::copy(action.begin(), action.end(), batch.actions.begin() + static_cast<std::ptrdiff_t>(at * batch.action_dim));
        batch.behavior_logp[at] = logp;

        std::span<const S> critic_row(batch.critic_obs.data() + at * batch.critic_dim,
                                      static_cast<std::size_t>(batch.critic_dim));
        model.critic_norm.observe(critic_row);
        batch.values[at] = policy::critic_value(model, critic_row);

        std::vector<double> action_d(action.begin(), action.end());
        auto step = env.step(action_d);
        batch.rewards[at] = static_cast<S>(step.reward);
        batch.valid[at] = 1;
        run_return_[static_cast<std::size_t>(b)] += step.reward;
        run_len_[static_cast<std::size_t>(b)] += 1;

        if (step.done) {
          batch.dones[at] = 1;
          records.returns.push_back(run_return_[static_cast<std::size_t>(b)]);
          records.lengths.push_back(run_len_[static_cast<std::size_t>(b)]);
          records.reasons.push_back(simenv::termination_name(*step.reason));
          run_return_[static_cast<std::size_t>(b)] = 0.0;
          run_len_[static_cast<std::size_t>(b)] = 0;
          if (auto_reset) {
            current_[static_cast<std::size_t>(b)] = env.reset();
            cache.clear();
          } else {
            stopped = true;
          }
        } else {
          current_[static_cast<std::size_t>(b)] = step.obs;
        }
      } catch (const std::exception&) {
        failed_[static_cast<std::size_t>(b)] = 1;  // surfaces per-env, batch continues
        stopped = true;
      }
    }
    // bootstrap from the observation that follows the segment
    if (!failed_[static_cast<std::size_t>(b)]) {
      std::vector<S> critic_row(static_cast<std::size_t>(batch.critic_dim));
      const auto& obs = current_[static_cast<std::size_t>(b)];
      for (int i = 0; i < batch.critic_dim; ++i) critic_row[static_cast<std::size_t>(i)] = static_cast<S>(obs.critic[static_cast<std::size_t>(i)]);
      batch.bootstrap_value[static_cast<std::size_t>(b)] = policy::critic_value(model, critic_row);
    }
  }

  simenv::VecEnv& envs_;
  ModelConfig cfg_;
  int threads_;
  std::vector<KVCache<S>> caches_;
  std::vector<InferenceContext<S>> ctxs_;
  std::vector<Rng> rngs_;
  std::vector<simenv::Observations> current_;
  std::vector<std::uint8_t> failed_;
  std::vector<double> run_return_;
  std::vector<int> run_len_;
  std::vector<PerEnvRecords> per_env_records_;
  std::deque<double> recent_returns_;
};

/// Reverse GAE recursion with done resets; advantages normalized over valid
/// entries (mean 0, std 1, eps 1e-8). Returns = advantages + values.
template <std::floating_point S>
void compute_gae(RolloutBatch<S>& batch, double gamma, double lambda, bool normalize = true) {
  const auto n = static_cast<std::size_t>(batch.B) * batch.T;
  batch.advantages.assign(n, S{0});
  batch.returns.assign(n, S{0});
  for (int b = 0; b < batch.B; ++b) {
    double carry = 0.0;
    for (int t = batch.T - 1; t >= 0; --t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) {
        carry = 0.0;
        continue;
      }
      const double not_done = batch.dones[at] ? 0.0 : 1.0;
      double next_value;
      if (t == batch.T - 1 || !batch.valid[batch.idx(b, t + 1)]) {
        next_value = static_cast<double>(batch.bootstrap_value[static_cast<std::size_t>(b)]);
      } else {
        next_value = static_cast<double>(batch.values[batch.idx(b, t + 1)]);
      }
      const double delta = static_cast<double>(batch.rewards[at]) + gamma * next_value * not_done -
                           static_cast<double>(batch.values[at]);
      carry = delta + gamma * lambda * not_done * carry;
      batch.advantages[at] = static_cast<S>(carry);
      batch.returns[at] = static_cast<S>(carry + static_cast<double>(batch.values[at]));
    }
  }
  if (normalize) {
    double mean = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (batch.valid[i]) {
        mean += static_cast<double>(batch.advantages[i]);
        ++count;
      }
    if (count == 0) fail("compute_gae: no valid entries");
    mean /= count;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (batch.valid[i]) {
        const double d = static_cast<double>(batch.advantages[i]) - mean;
        var += d * d;
      }
    const double stddev = std::sqrt(var / count) + 1e-8;
    for (std::size_t i = 0; i < n; ++i)
      if (batch.valid[i])
        batch.advantages[i] = static_cast<S>((static_cast<double>(batch.advantages[i]) - mean) / stddev);
  }
}

}  // namespace motrack::trainer
