// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/diffmath/kernels.hpp"
#include "motrack/policy/forward.hpp"

namespace motrack::kvruntime {

using diffmath::Tensor;
using diffmath::kernels::OpCounter;
using policy::ModelConfig;
using policy::NormMode;
using policy::PolicyModel;
using policy::RouterDecision;

/// Per-environment rolling context: one K and one V ring of capacity C per
/// transformer block. Rotary positions come from the monotone episode-local
/// counter, never from the ring slot, so relative offsets survive the wrap.
template <std::floating_point S>
class KVCache {
 public:
  explicit KVCache(const ModelConfig& cfg)
      : capacity_(cfg.context),
        kv_dim_(cfg.kv_dim()),
        blocks_(cfg.blocks),
        k_(static_cast<std::size_t>(cfg.blocks), Tensor<S>(cfg.context, cfg.kv_dim())),
        v_(static_cast<std::size_t>(cfg.blocks), Tensor<S>(cfg.context, cfg.kv_dim())) {}

  int capacity() const { return capacity_; }
  int kv_dim() const { return kv_dim_; }
  int blocks() const { return blocks_; }
  int valid_len() const { return static_cast<int>(std::min<std::int64_t>(count_, capacity_)); }
  std::int64_t position() const { return count_; }  // absolute position of the next token

  void clear() { count_ = 0; }

  /// Row for the entry at absolute position p (caller guarantees residency).
  S* k_row(int block, std::int64_t p) { return k_[static_cast<std::size_t>(block)].data() + slot(p) * kv_dim_; }
  S* v_row(int block, std::int64_t p) { return v_[static_cast<std::size_t>(block)].data() + slot(p) * kv_dim_; }
  const S* k_row(int block, std::int64_t p) const {
    return k_[static_cast<std::size_t>(block)].data() + slot(p) * kv_dim_;
  }
  const S* v_row(int block, std::int64_t p) const {
    return v_[static_cast<std::size_t>(block)].data() + slot(p) * kv_dim_;
  }

  void advance() { ++count_; }

 private:
  std::size_t slot(std::int64_t p) const { return static_cast<std::size_t>(p % capacity_); }

  int capacity_, kv_dim_, blocks_;
  std::int64_t count_ = 0;
  std::vector<Tensor<S>> k_, v_;
};

template <std::floating_point S>
struct StepOutput {
  std::vector<S> mu;
  std::vector<S> sigma;
  std::vector<RouterDecision> routing;  // one per block
};

/// Preallocated scratch for single-token autoregressive inference. One
/// context may serve many caches, but never two caches concurrently.
template <std::floating_point S>
class InferenceContext {
 public:
  explicit InferenceContext(const ModelConfig& cfg)
      : cfg_(cfg),
        norm_obs_(static_cast<std::size_t>(cfg.obs_dim)),
        x_(static_cast<std::size_t>(cfg.hidden)),
        u_(static_cast<std::size_t>(cfg.hidden)),
        y_(static_cast<std::size_t>(cfg.hidden)),
        att_(static_cast<std::size_t>(cfg.hidden)),
        gate_(static_cast<std::size_t>(cfg.hidden)),
        proj_(static_cast<std::size_t>(cfg.hidden)),
        tok_h_(static_cast<std::size_t>(cfg.token_mlp_hidden)),
        q_(static_cast<std::size_t>(cfg.hidden)),
        kv_k_(static_cast<std::size_t>(cfg.kv_dim())),
        kv_v_(static_cast<std::size_t>(cfg.kv_dim())),
        qh_(static_cast<std::size_t>(cfg.head_dim())),
        weights_(static_cast<std::size_t>(cfg.context)),
        moe_h_(static_cast<std::size_t>(cfg.expert_hidden)),
        moe_out_(static_cast<std::size_t>(cfg.hidden)),
        head_h_(static_cast<std::size_t>(cfg.head_hidden)) {
    out_.mu.resize(static_cast<std::size_t>(cfg.action_dim));
    out_.sigma.resize(static_cast<std::size_t>(cfg.action_dim));
    out_.routing.resize(static_cast<std::size_t>(cfg.blocks));
    for (auto& d : out_.routing) {
      d.experts.reserve(static_cast<std::size_t>(cfg.top_k));
      d.alpha.reserve(static_cast<std::size_t>(cfg.top_k));
      d.scores.reserve(static_cast<std::size_t>(cfg.experts));
    }
  }

  /// Processes one new observation token while attending to the cached
  /// context; appends the token's K/V to the ring and advances the position.
  const StepOutput<S>& step(PolicyModel<S>& model, KVCache<S>& cache, std::span<const S> raw_obs,
                            NormMode mode, OpCounter* ctr = nullptr);

 private:
  ModelConfig cfg_;
  StepOutput<S> out_;
  std::vector<S> norm_obs_, x_, u_, y_, att_, gate_, proj_, tok_h_;
  std::vector<S> q_, kv_k_, kv_v_, qh_, weights_, moe_h_, moe_out_, head_h_;
};

template <std::floating_point S>
const StepOutput<S>& InferenceContext<S>::step(PolicyModel<S>& model, KVCache<S>& cache,
                                               std::span<const S> raw_obs, NormMode mode, OpCounter* ctr) {
  namespace k = diffmath::kernels;
  const ModelConfig& cfg = model.cfg;
  if (cfg.obs_dim != cfg_.obs_dim || cfg.hidden != cfg_.hidden || cfg.blocks != cfg_.blocks ||
      cfg.context != cfg_.context || cfg.experts != cfg_.experts)
    fail("kvruntime: inference context built for a different model config");
  if (cache.capacity() != cfg.context || cache.kv_dim() != cfg.kv_dim() || cache.blocks() != cfg.blocks)
    fail("kvruntime: cache/model config mismatch");
  if (static_cast<int>(raw_obs.size()) != cfg.obs_dim) fail("kvruntime: observation layout mismatch");

  const int dh = cfg.head_dim();
  const int group = cfg.heads / cfg.kv_heads;
  const S eps = static_cast<S>(cfg.rmsnorm_eps);
  const std::int64_t pos = cache.position();
  const int valid_after = std::min<int>(static_cast<int>(pos) + 1, cfg.context);

  if (mode == NormMode::Train) model.actor_norm.observe(raw_obs);
  model.actor_norm.normalize(raw_obs, norm_obs_);
  std::span<const S> ref(norm_obs_.data() + (cfg.obs_dim - cfg.ref_dim), static_cast<std::size_t>(cfg.ref_dim));

  // tokenizer projection
  k::matvec<S>(norm_obs_, model.tok_w1, tok_h_, ctr);
  k::add_inplace<S>(tok_h_, std::span<const S>(model.tok_b1.data(), tok_h_.size()));
  k::silu_inplace<S>(tok_h_);
  k::matvec<S>(tok_h_, model.tok_w2, x_, ctr);
  k::add_inplace<S>(x_, std::span<const S>(model.tok_b2.data(), x_.size()));

  for (int l = 0; l < cfg.blocks; ++l) {
    auto& blk = model.blocks[static_cast<std::size_t>(l)];
    k::rmsnorm<S>(x_, std::span<const S>(blk.att_norm_g.data(), blk.att_norm_g.numel()), eps, u_);
    k::matvec<S>(u_, blk.wq, q_, ctr);
    k::matvec<S>(u_, blk.wk, kv_k_, ctr);
    k::matvec<S>(u_, blk.wv, kv_v_, ctr);

    // normalize + rotate the new K per kv head, then append to the ring
    S* krow = cache.k_row(l, pos);
    S* vrow = cache.v_row(l, pos);
    for (int g = 0; g < cfg.kv_heads; ++g) {
      std::span<S> kg(kv_k_.data() + static_cast<std::size_t>(g) * dh, static_cast<std::size_t>(dh));
      k::rmsnorm<S>(kg, std::span<const S>(blk.k_norm_g.data(), static_cast<std::size_t>(dh)), eps,
                    std::span<S>(krow + static_cast<std::size_t>(g) * dh, static_cast<std::size_t>(dh)));
      k::rope_inplace<S>(std::span<S>(krow + static_cast<std::size_t>(g) * dh, static_cast<std::size_t>(dh)),
                         pos, cfg.rope_base);
    }
    std::copy(kv_v_.begin(), kv_v_.end(), vrow);

    // attention over the cached context (positions pos-valid+1 .. pos)
    const std::int64_t first = pos + 1 - valid_after;
    for (int h = 0; h < cfg.heads; ++h) {
      std::span<const S> qslice(q_.data() + static_cast<std::size_t>(h) * dh, static_cast<std::size_t>(dh));
      k::rmsnorm<S>(qslice, std::span<const S>(blk.q_norm_g.data(), static_cast<std::size_t>(dh)), eps, qh_);
      k::rope_inplace<S>(qh_, pos, cfg.rope_base);
      const int g = h / group;
      const S scale = S{1} / std::sqrt(static_cast<S>(dh));
      for (int j = 0; j < valid_after; ++j) {
        const S* kj = cache.k_row(l, first + j) + static_cast<std::size_t>(g) * dh;
        S acc{0};
        for (int c = 0; c < dh; ++c) acc += qh_[static_cast<std::size_t>(c)] * kj[c];
        weights_[static_cast<std::size_t>(j)] = acc * scale;
      }
      if (ctr) ctr->add(static_cast<std::uint64_t>(valid_after) * dh);
      k::softmax_inplace<S>(weights_, static_cast<std::size_t>(valid_after));
      S* oh = att_.data() + static_cast<std::size_t>(h) * dh;
      std::fill(oh, oh + dh, S{0});
      for (int j = 0; j < valid_after; ++j) {
        const S* vj = cache.v_row(l, first + j) + static_cast<std::size_t>(g) * dh;
        const S wj = weights_[static_cast<std::size_t>(j)];
        for (int c = 0; c < dh; ++c) oh[c] += wj * vj[c];
      }
      if (ctr) ctr->add(static_cast<std::uint64_t>(valid_after) * dh);
    }

    // sigmoid gate from the block input, output projection, residual
    k::matvec<S>(x_, blk.gate_w, gate_, ctr);
    k::add_inplace<S>(gate_, std::span<const S>(blk.gate_b.data(), gate_.size()));
    k::sigmoid_inplace<S>(gate_);
    for (std::size_t i = 0; i < att_.size(); ++i) att_[i] *= gate_[i];
    k::matvec<S>(att_, blk.wo, proj_, ctr);
    for (std::size_t i = 0; i < x_.size(); ++i) y_[i] = x_[i] + proj_[i];

    // sparse MoE sublayer; the router sees only the normalized reference slice
    k::rmsnorm<S>(y_, std::span<const S>(blk.moe_norm_g.data(), blk.moe_norm_g.numel()), eps, u_);
    RouterDecision& dec = out_.routing[static_cast<std::size_t>(l)];
    dec = policy::route(blk.router_w, blk.router_b, ref, cfg.top_k);
    if (ctr) ctr->add(static_cast<std::uint64_t>(cfg.ref_dim) * cfg.experts);
    std::fill(moe_out_.begin(), moe_out_.end(), S{0});
    auto run_expert = [&](const Tensor<S>& w1, const Tensor<S>& w2, S alpha) {
      k::matvec<S>(u_, w1, moe_h_, ctr);
      k::silu_inplace<S>(moe_h_);
      for (int o = 0; o < cfg.hidden; ++o) {
        S acc{0};
        for (int j2 = 0; j2 < cfg.expert_hidden; ++j2) acc += moe_h_[static_cast<std::size_t>(j2)] * w2(j2, o);
        moe_out_[static_cast<std::size_t>(o)] += alpha * acc;
      }
      if (ctr) ctr->add(static_cast<std::uint64_t>(cfg.expert_hidden) * cfg.hidden);
    };
    if (cfg.shared_expert) run_expert(blk.shared_w1, blk.shared_w2, S{1});
    for (std::size_t i = 0; i < dec.experts.size(); ++i)
      run_expert(blk.expert_w1[static_cast<std::size_t>(dec.experts[i])],
                 blk.expert_w2[static_cast<std::size_t>(dec.experts[i])], static_cast<S>(dec.alpha[i]));
    for (std::size_t i = 0; i < x_.size(); ++i) x_[i] = y_[i] + moe_out_[i];
  }

  // final norm + action head
  k::rmsnorm<S>(x_, std::span<const S>(model.final_norm_g.data(), model.final_norm_g.numel()), eps, u_);
  k::matvec<S>(u_, model.act_w1, head_h_, ctr);
  k::add_inplace<S>(head_h_, std::span<const S>(model.act_b1.data(), head_h_.size()));
  k::silu_inplace<S>(head_h_);
  k::matvec<S>(head_h_, model.act_w2, out_.mu, ctr);
  k::add_inplace<S>(out_.mu, std::span<const S>(model.act_b2.data(), out_.mu.size()));
  const auto sig = policy::action_sigma(model);
  std::copy(sig.begin(), sig.end(), out_.sigma.begin());

  cache.advance();
  return out_;
}

}  // namespace motrack::kvruntime
