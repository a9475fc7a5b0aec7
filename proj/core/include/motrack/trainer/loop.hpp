// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>

#include "motrack/policy/checkpoint.hpp"
#include "motrack/trainer/ppo.hpp"

namespace motrack::trainer {

struct TrainConfig {
  simenv::EnvConfig env;
  policy::ModelConfig model;  // fully resolved (env-coupled dims filled)
  PPOConfig ppo;
  std::uint64_t seed = 0;
  int iterations = 100;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  int threads = 1;
  std::filesystem::path out_dir;
};

struct IterationStats {
  int iter = 0;
  double reward_mean = 0.0;
  double ep_len_mean = 0.0;
  int episodes_completed = 0;
  LossReport loss;       // averaged over epochs
  double first_epoch_ratio_dev = 0.0;
  double collect_seconds = 0.0;
  double update_seconds = 0.0;
};

/// collect -> GAE -> epochs of sequence-level updates -> EMA commit, with an
/// append-only metrics log. Wall-clock throughput goes to a perf sidecar so
/// the metrics log stays bit-reproducible under a fixed seed.
template <std::floating_point S>
class Trainer {
 public:
  Trainer(TrainConfig cfg, motiondata::ClipLibraryPtr clips)
      : cfg_(std::move(cfg)),
        clips_(std::move(clips)),
        envs_(cfg_.env, clips_, cfg_.ppo.num_envs, derive_seed(cfg_.seed, 0xe11)) {
    cfg_.ppo.validate();
    cfg_.model.validate();
    model_.cfg = cfg_.model;
    Rng rng(derive_seed(cfg_.seed, 0x30de1));
    model_.init(rng);
    opt_ = std::make_unique<AdamW<S>>(model_, cfg_.ppo.lr, cfg_.ppo.adam_beta1, cfg_.ppo.adam_beta2,
                                      cfg_.ppo.adam_eps, cfg_.ppo.weight_decay);
    collector_ = std::make_unique<RolloutCollector<S>>(envs_, cfg_.model,
                                                       derive_seed(cfg_.seed, 0xc011ec7), cfg_.threads);
    if (!cfg_.out_dir.empty()) {
      std::filesystem::create_directories(cfg_.out_dir);
      metrics_.open(cfg_.out_dir / "metrics.jsonl", std::ios::app);
      perf_.open(cfg_.out_dir / "perf.jsonl", std::ios::app);
      if (!metrics_ || !perf_) fail("Trainer: cannot open log files in " + cfg_.out_dir.string());
    }
  }

  PolicyModel<S>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<IterationStats>& history() const { return history_; }

  void resume_from(const std::filesystem::path& model_ckpt, const std::filesystem::path& opt_state) {
    model_ = policy::load_checkpoint_expect<S>(model_ckpt, cfg_.model);
    auto r = io::ContainerReader::from_file(opt_state, "MOPT");
    opt_->load(r);
    start_iter_ = r.meta().at("iteration").get<int>();
  }

  IterationStats run_iteration(int iter) {
    using clock = std::chrono::steady_clock;
    IterationStats st;
    st.iter = iter;

    const auto t0 = clock::now();
    auto batch = collector_->collect(model_, cfg_.ppo.segment_len, true);
    const auto t1 = clock::now();
    compute_gae(batch, cfg_.ppo.gamma, cfg_.ppo.gae_lambda, cfg_.ppo.normalize_advantages);

    LossReport mean_report;
    for (int e = 0; e < cfg_.ppo.epochs; ++e) {
      auto rep = sequence_ppo_update(model_, *opt_, batch, cfg_.ppo);
      if (e == 0) st.first_epoch_ratio_dev = rep.max_ratio_dev;
      accumulate(mean_report, rep, 1.0 / cfg_.ppo.epochs);
    }
    const auto t2 = clock::now();

    model_.actor_norm.commit();
    model_.critic_norm.commit();

    st.loss = mean_report;
    st.reward_mean = collector_->recent_return_mean();
    st.episodes_completed = static_cast<int>(batch.episode_returns.size());
    if (!batch.episode_lengths.empty()) {
      double acc = 0;
      for (int l : batch.episode_lengths) acc += l;
      st.ep_len_mean = acc / static_cast<double>(batch.episode_lengths.size());
    }
    st.collect_seconds = std::chrono::duration<double>(t1 - t0).count();
    st.update_seconds = std::chrono::duration<double>(t2 - t1).count();

    env_steps_ += static_cast<std::int64_t>(batch.num_valid());
    total_episodes_ += st.episodes_completed;
    log_iteration(st, batch);
    history_.push_back(st);
    return st;
  }

  /// Runs the remaining iterations, checkpointing per config.
  void run() {
    for (int i = start_iter_; i < cfg_.iterations; ++i) {
      auto st = run_iteration(i);
      (void)st;
      if (!cfg_.out_dir.empty() && cfg_.checkpoint_every > 0 && (i + 1) % cfg_.checkpoint_every == 0)
        write_checkpoint(i + 1, false);
    }
    if (!cfg_.out_dir.empty()) write_checkpoint(cfg_.iterations, true);
  }

  void write_checkpoint(int iteration, bool final) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%06d.mckp", iteration);
    const auto path = cfg_.out_dir / (final ? "checkpoint_final.mckp" : name);
    policy::save_checkpoint(model_, path);
    io::ContainerWriter w("MOPT", 1);
    w.meta()["iteration"] = iteration;
    opt_->save(w);
    w.write_file(cfg_.out_dir / "optimizer_state.bin");
  }

 private:
  static void accumulate(LossReport& into, const LossReport& rep, double w) {
    into.total += w * rep.total;
    into.surrogate += w * rep.surrogate;
    into.value_loss += w * rep.value_loss;
    into.entropy += w * rep.entropy;
    into.l_vel += w * rep.l_vel;
    into.l_contact += w * rep.l_contact;
    into.l_ref += w * rep.l_ref;
    into.l_robot += w * rep.l_robot;
    into.l_dead += w * rep.l_dead;
    into.max_ratio_dev = std::max(into.max_ratio_dev, rep.max_ratio_dev);
    into.clip_fraction += w * rep.clip_fraction;
    into.num_dead_experts = rep.num_dead_experts;
    into.expert_token_counts = rep.expert_token_counts;
    into.forward_passes += rep.forward_passes;
  }

  void log_iteration(const IterationStats& st, const RolloutBatch<S>& batch) {
    if (!metrics_) return;
    nlohmann::json j;
    j["iter"] = st.iter;
    j["env_steps"] = env_steps_;
    j["reward_mean"] = st.reward_mean;
    j["ep_len_mean"] = st.ep_len_mean;
    j["episodes"] = total_episodes_;
    j["loss"] = {{"total", st.loss.total},         {"surrogate", st.loss.surrogate},
                 {"value", st.loss.value_loss},    {"entropy", st.loss.entropy},
                 {"vel", st.loss.l_vel},           {"contact", st.loss.l_contact},
                 {"ref", st.loss.l_ref},           {"robot", st.loss.l_robot},
                 {"dead", st.loss.l_dead},         {"max_ratio_dev", st.loss.max_ratio_dev},
                 {"clip_fraction", st.loss.clip_fraction}};
    j["router"] = {{"update_counts", st.loss.expert_token_counts},
                   {"rollout_counts", batch.router_counts},
                   {"dead", st.loss.num_dead_experts}};
    metrics_ << j.dump() << "\n";
    metrics_.flush();
    if (perf_) {
      nlohmann::json p;
      p["iter"] = st.iter;
      p["collect_s"] = st.collect_seconds;
      p["update_s"] = st.update_seconds;
      const double steps = static_cast<double>(cfg_.ppo.num_envs) * cfg_.ppo.segment_len;
      p["steps_per_s"] = steps / std::max(1e-9, st.collect_seconds + st.update_seconds);
      perf_ << p.dump() << "\n";
      perf_.flush();
    }
  }

  TrainConfig cfg_;
  motiondata::ClipLibraryPtr clips_;
  simenv::VecEnv envs_;
  PolicyModel<S> model_;
  std::unique_ptr<AdamW<S>> opt_;
  std::unique_ptr<RolloutCollector<S>> collector_;
  std::ofstream metrics_, perf_;
  std::vector<IterationStats> history_;
  std::int64_t env_steps_ = 0;
  int total_episodes_ = 0;
  int start_iter_ = 0;
};

}  // namespace motrack::trainer
