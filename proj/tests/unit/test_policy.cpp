// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "../common/test_util.hpp"
#include "../oracles/mha_oracle.hpp"
#include "motrack/policy/checkpoint.hpp"
#include "motrack/policy/forward.hpp"
#include "motrack/policy/gaussian.hpp"

using namespace motrack;
using namespace motrack::policy;
using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.obs_dim = 24;
  c.ref_dim = 10;
  c.critic_obs_dim = 30;
  c.action_dim = 4;
  c.vel_dim = 3;
  c.contact_dim = 2;
  c.keypos_dim = 12;
  c.hidden = 32;
  c.context = 16;
  c.heads = 4;
  c.kv_heads = 2;
  c.blocks = 2;
  c.experts = 8;
  c.top_k = 2;
  c.expert_hidden = 32;
  c.token_mlp_hidden = 32;
  c.head_hidden = 16;
  c.critic_hidden = 32;
  c.validate();
  return c;
}

template <std::floating_point S>
PolicyModel<S> make_model(const ModelConfig& cfg, std::uint64_t seed) {
  PolicyModel<S> m;
  m.cfg = cfg;
  Rng rng(seed);
  m.init(rng);
  return m;
}

Tensor<double> random_obs(int T, int dim, Rng& rng) {
  return Tensor<double>::rand_uniform(T, dim, rng, -1.0, 1.0);
}

std::vector<std::int64_t> iota_positions(int T, std::int64_t start = 0) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(T));
  std::iota(p.begin(), p.end(), start);
  return p;
}

}  // namespace

TEST_CASE("tokenize: unit statistics reduce normalization to identity") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 1);
  // active stats are (0, 1) after init
  Rng rng(2);
  std::vector<double> obs(static_cast<std::size_t>(cfg.obs_dim));
  for (auto& v : obs) v = uniform(rng, -1, 1);
  auto tok = tokenize(model, obs, NormMode::Eval);
  // expected: plain MLP of the raw observation
  std::vector<double> h(static_cast<std::size_t>(cfg.token_mlp_hidden));
  for (int j = 0; j < cfg.token_mlp_hidden; ++j) {
    double acc = model.tok_b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < cfg.obs_dim; ++i) acc += obs[static_cast<std::size_t>(i)] * model.tok_w1(i, j);
    h[static_cast<std::size_t>(j)] = acc / (1.0 + std::exp(-acc));
  }
  for (int j = 0; j < cfg.hidden; ++j) {
    double acc = model.tok_b2[static_cast<std::size_t>(j)];
    for (int i = 0; i < cfg.token_mlp_hidden; ++i) acc += h[static_cast<std::size_t>(i)] * model.tok_w2(i, j);
    CHECK(tok(0, j) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("tokenize: eval never mutates statistics, train updates pending only") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 3);
  Rng rng(4);
  std::vector<double> obs(static_cast<std::size_t>(cfg.obs_dim));
  for (auto& v : obs) v = uniform(rng, -2, 2);

  const auto h0 = model.state_hash();
  tokenize(model, obs, NormMode::Eval);
  tokenize(model, obs, NormMode::Eval);
  CHECK(model.state_hash() == h0);

  tokenize(model, obs, NormMode::Train);
  CHECK(model.state_hash() != h0);
  // active stats still untouched until commit
  CHECK(model.actor_norm.mean[0] == 0.0);
  CHECK(model.actor_norm.var[0] == 1.0);
  model.actor_norm.commit();
  CHECK(model.actor_norm.mean[0] != 0.0);
}

TEST_CASE("EMA statistics match an independent streaming-moments recurrence") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 5);
  const double rho = cfg.ema_decay;
  std::vector<double> m(static_cast<std::size_t>(cfg.obs_dim), 0.0);
  std::vector<double> v(static_cast<std::size_t>(cfg.obs_dim), 1.0);
  Rng rng(6);
  std::vector<double> obs(static_cast<std::size_t>(cfg.obs_dim));
  for (int n = 0; n < 1000; ++n) {
    for (auto& x : obs) x = gaussian(rng, 0.3, 1.7);
    for (int i = 0; i < cfg.obs_dim; ++i) {
      const double m_old = m[static_cast<std::size_t>(i)];
      m[static_cast<std::size_t>(i)] = rho * m_old + (1 - rho) * obs[static_cast<std::size_t>(i)];
      v[static_cast<std::size_t>(i)] = rho * v[static_cast<std::size_t>(i)] +
                                       (1 - rho) * (obs[static_cast<std::size_t>(i)] - m_old) *
                                           (obs[static_cast<std::size_t>(i)] - m_old);
    }
    tokenize(model, obs, NormMode::Train);
  }
  model.actor_norm.commit();
  for (int i = 0; i < cfg.obs_dim; ++i) {
    CHECK(std::fabs(model.actor_norm.mean[static_cast<std::size_t>(i)] - m[static_cast<std::size_t>(i)]) <= 1e-8);
    CHECK(std::fabs(model.actor_norm.var[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]) <= 1e-8);
  }
}

TEST_CASE("attention: T=1 works and longer-than-context segments are rejected") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 7);
  Rng rng(8);
  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  auto obs1 = model.actor_norm.normalize_rows(random_obs(1, cfg.obs_dim, rng));
  auto out = forward_sequence(tape, pv, cfg, obs1, iota_positions(1));
  CHECK(out.mu.val().rows() == 1);
  CHECK(out.mu.val().cols() == cfg.action_dim);

  auto big = model.actor_norm.normalize_rows(random_obs(cfg.context + 1, cfg.obs_dim, rng));
  CHECK_THROWS(forward_sequence(tape, pv, cfg, big, iota_positions(cfg.context + 1)));
}

TEST_CASE("attention causality: perturbing token j changes outputs only at positions >= j") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 9);
  Rng rng(10);
  const int T = 8;
  auto raw = random_obs(T, cfg.obs_dim, rng);
  auto norm = model.actor_norm.normalize_rows(raw);
  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  auto base = forward_sequence(tape, pv, cfg, norm, iota_positions(T));

  for (int j = 0; j < T; ++j) {
    auto perturbed = norm;
    for (int c = 0; c < cfg.obs_dim; ++c) perturbed(j, c) += 0.25;
    auto out = forward_sequence(tape, pv, cfg, perturbed, iota_positions(T));
    for (int t = 0; t < T; ++t) {
      double diff = 0;
      for (int a = 0; a < cfg.action_dim; ++a)
        diff = std::max(diff, std::fabs(out.mu.val()(t, a) - base.mu.val()(t, a)));
      if (t < j) CHECK(diff == 0.0);
      else if (t == j) CHECK(diff > 0.0);
    }
  }
}

TEST_CASE("GQA with n_kv == n_h matches the independent MHA reference") {
  auto cfg = tiny_config();
  cfg.kv_heads = cfg.heads;  // degenerate grouping
  cfg.blocks = 1;
  auto model = make_model<double>(cfg, 11);
  Rng rng(12);
  const int T = 6;
  auto norm = model.actor_norm.normalize_rows(random_obs(T, cfg.obs_dim, rng));
  auto positions = iota_positions(T);

  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  auto out = forward_sequence(tape, pv, cfg, norm, positions);
  // pre_moe is exactly the attention sublayer output (post residual) of block 0
  std::vector<std::vector<double>> x_rows(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    std::vector<double> raw_row(norm.data() + static_cast<std::size_t>(t) * cfg.obs_dim,
                                norm.data() + static_cast<std::size_t>(t + 1) * cfg.obs_dim);
    // tokens via the eager tokenizer on pre-normalized rows: stats are (0,1)
    PolicyModel<double>& m = model;
    std::vector<double> h(static_cast<std::size_t>(cfg.token_mlp_hidden));
    for (int j = 0; j < cfg.token_mlp_hidden; ++j) {
      double acc = m.tok_b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < cfg.obs_dim; ++i) acc += raw_row[static_cast<std::size_t>(i)] * m.tok_w1(i, j);
      h[static_cast<std::size_t>(j)] = acc / (1.0 + std::exp(-acc));
    }
    x_rows[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(cfg.hidden));
    for (int j = 0; j < cfg.hidden; ++j) {
      double acc = m.tok_b2[static_cast<std::size_t>(j)];
      for (int i = 0; i < cfg.token_mlp_hidden; ++i) acc += h[static_cast<std::size_t>(i)] * m.tok_w2(i, j);
      x_rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = acc;
    }
  }
  auto ref = testoracle::mha_reference(model.blocks[0], cfg, x_rows, positions);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < cfg.hidden; ++i)
      CHECK(std::fabs(out.pre_moe.val()(t, i) - ref[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) <=
            1e-6);
}

TEST_CASE("router: k = E selects everything with a full softmax") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 13);
  Rng rng(14);
  std::vector<double> ref(static_cast<std::size_t>(cfg.ref_dim));
  for (auto& v : ref) v = uniform(rng, -1, 1);
  auto d = route(model.blocks[0].router_w, model.blocks[0].router_b, ref, cfg.experts);
  CHECK(static_cast<int>(d.experts.size()) == cfg.experts);
  double sum = 0;
  for (double a : d.alpha) sum += a;
  CHECK(std::fabs(sum - 1.0) <= 1e-9);
  // alpha equals softmax over all scores
  double mx = *std::max_element(d.scores.begin(), d.scores.end());
  double denom = 0;
  for (double s : d.scores) denom += std::exp(s - mx);
  for (std::size_t i = 0; i < d.experts.size(); ++i) {
    const double expect = std::exp(d.scores[static_cast<std::size_t>(d.experts[i])] - mx) / denom;
    CHECK(std::fabs(d.alpha[i] - expect) <= 1e-12);
  }
}

TEST_CASE("router: deterministic, distinct indices, threshold is min selected score") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 15);
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ref(static_cast<std::size_t>(cfg.ref_dim));
    for (auto& v : ref) v = uniform(rng, -2, 2);
    auto d1 = route(model.blocks[0].router_w, model.blocks[0].router_b, ref, cfg.top_k);
    auto d2 = route(model.blocks[0].router_w, model.blocks[0].router_b, ref, cfg.top_k);
    CHECK(d1.experts == d2.experts);
    CHECK(d1.alpha == d2.alpha);
    CHECK(d1.experts[0] != d1.experts[1]);
    double sum = 0, min_sel = 1e300;
    for (std::size_t i = 0; i < d1.experts.size(); ++i) {
      sum += d1.alpha[i];
      min_sel = std::min(min_sel, d1.scores[static_cast<std::size_t>(d1.experts[i])]);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(d1.threshold == min_sel);
    // selected are really the top scorers
    std::vector<double> sorted = d1.scores;
    std::sort(sorted.rbegin(), sorted.rend());
    CHECK(d1.scores[static_cast<std::size_t>(d1.experts[0])] == sorted[0]);
    CHECK(d1.scores[static_cast<std::size_t>(d1.experts[1])] == sorted[1]);
  }
}

TEST_CASE("router tie-break picks the lowest index") {
  Tensor<double> w(2, 4);  // all-zero weights: every expert scores b
  Tensor<double> b(1, 4);
  b[0] = 1.0;
  b[1] = 5.0;
  b[2] = 5.0;
  b[3] = 5.0;
  std::vector<double> ref{0.3, -0.4};
  auto d = route(w, b, ref, 2);
  CHECK(d.experts[0] == 1);
  CHECK(d.experts[1] == 2);
}

TEST_CASE("routing reads only the reference slice: proprioceptive perturbations are invisible") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 17);
  Rng rng(18);
  const int T = 5;
  auto raw = random_obs(T, cfg.obs_dim, rng);
  auto norm = model.actor_norm.normalize_rows(raw);
  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  auto base = forward_sequence(tape, pv, cfg, norm, iota_positions(T));

  auto perturbed = norm;
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < cfg.obs_dim - cfg.ref_dim; ++c) perturbed(t, c) += uniform(rng, -3, 3);
  auto out = forward_sequence(tape, pv, cfg, perturbed, iota_positions(T));
  for (std::size_t l = 0; l < base.routing.size(); ++l) {
    for (int t = 0; t < T; ++t) {
      const auto& d0 = base.routing[l].decisions[static_cast<std::size_t>(t)];
      const auto& d1 = out.routing[l].decisions[static_cast<std::size_t>(t)];
      CHECK(d0.experts == d1.experts);
      CHECK(d0.alpha == d1.alpha);
      CHECK(d0.scores == d1.scores);
    }
  }
  // identical reference features for two tokens -> identical decisions
  auto twin = norm;
  for (int c = cfg.obs_dim - cfg.ref_dim; c < cfg.obs_dim; ++c) twin(1, c) = twin(0, c);
  auto out2 = forward_sequence(tape, pv, cfg, twin, iota_positions(T));
  CHECK(out2.routing[0].decisions[0].experts == out2.routing[0].decisions[1].experts);
  CHECK(out2.routing[0].decisions[0].alpha == out2.routing[0].decisions[1].alpha);
}

TEST_CASE("moe: zero routed weights reduce to the shared expert; k=1 gives alpha=1") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 19);
  auto& blk = model.blocks[0];
  Rng rng(20);
  std::vector<double> u(static_cast<std::size_t>(cfg.hidden));
  for (auto& v : u) v = uniform(rng, -1, 1);
  std::vector<double> ref(static_cast<std::size_t>(cfg.ref_dim));
  for (auto& v : ref) v = uniform(rng, -1, 1);

  auto zeroed = model;
  for (auto& w : zeroed.blocks[0].expert_w2)
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = 0.0;
  auto d = route(blk.router_w, blk.router_b, ref, cfg.top_k);
  auto with_experts = moe_apply<double>(zeroed.blocks[0], true, u, d);
  RouterDecision none = d;
  none.experts.clear();
  none.alpha.clear();
  auto shared_only = moe_apply<double>(zeroed.blocks[0], true, u, none);
  for (int i = 0; i < cfg.hidden; ++i) CHECK(with_experts[static_cast<std::size_t>(i)] ==
                                             doctest::Approx(shared_only[static_cast<std::size_t>(i)]));

  auto d1 = route(blk.router_w, blk.router_b, ref, 1);
  CHECK(d1.alpha.size() == 1);
  CHECK(d1.alpha[0] == 1.0);
}

TEST_CASE("moe matches a dense oracle that evaluates all experts with masked weights") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 21);
  auto& blk = model.blocks[0];
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(static_cast<std::size_t>(cfg.hidden));
    for (auto& v : u) v = uniform(rng, -1, 1);
    std::vector<double> ref(static_cast<std::size_t>(cfg.ref_dim));
    for (auto& v : ref) v = uniform(rng, -1, 1);
    auto d = route(blk.router_w, blk.router_b, ref, cfg.top_k);
    policy::ExpertEvalCounter counter;
    auto sparse = moe_apply<double>(blk, true, u, d, &counter);
    CHECK(counter.routed_evals == static_cast<std::uint64_t>(cfg.top_k));

    // dense route: run every expert, weight unselected ones by zero
    std::vector<double> dense(static_cast<std::size_t>(cfg.hidden), 0.0);
    {
      RouterDecision shared_none;
      auto sh = moe_apply<double>(blk, true, u, shared_none);
      for (int i = 0; i < cfg.hidden; ++i) dense[static_cast<std::size_t>(i)] = sh[static_cast<std::size_t>(i)];
      for (int e = 0; e < cfg.experts; ++e) {
        double alpha = 0.0;
        for (std::size_t i = 0; i < d.experts.size(); ++i)
          if (d.experts[i] == e) alpha = d.alpha[i];
        RouterDecision one;
        one.experts = {e};
        one.alpha = {1.0};
        auto fe = moe_apply<double>(blk, false, u, one);
        for (int i = 0; i < cfg.hidden; ++i) dense[static_cast<std::size_t>(i)] += alpha * fe[static_cast<std::size_t>(i)];
      }
    }
    for (int i = 0; i < cfg.hidden; ++i)
      CHECK(std::fabs(sparse[static_cast<std::size_t>(i)] - dense[static_cast<std::size_t>(i)]) <= 1e-7);
  }
}

TEST_CASE("forward_sequence evaluates exactly k routed experts per token") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 23);
  Rng rng(24);
  const int T = 7;
  auto norm = model.actor_norm.normalize_rows(random_obs(T, cfg.obs_dim, rng));
  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  policy::ExpertEvalCounter counter;
  forward_sequence(tape, pv, cfg, norm, iota_positions(T), &counter);
  CHECK(counter.tokens == static_cast<std::uint64_t>(T * cfg.blocks));
  CHECK(counter.routed_evals == static_cast<std::uint64_t>(T * cfg.blocks * cfg.top_k));
}

TEST_CASE("action distribution: log density value and gradient") {
  const int J = 6;
  std::vector<double> mu(J, 0.0), sigma(J, 1.0), a(J, 0.0);
  const double lp = gaussian_log_prob<double>(a, mu, sigma);
  CHECK(lp == doctest::Approx(-0.5 * J * std::log(2.0 * M_PI)).epsilon(1e-12));

  // d log p / d mu via central differences
  Rng rng(25);
  for (auto& v : mu) v = uniform(rng, -1, 1);
  for (auto& v : a) v = uniform(rng, -1, 1);
  for (auto& v : sigma) v = std::exp(uniform(rng, -1, 0.5));
  for (int j = 0; j < J; ++j) {
    auto p = mu, m = mu;
    const double h = 1e-6;
    p[static_cast<std::size_t>(j)] += h;
    m[static_cast<std::size_t>(j)] -= h;
    const double fd =
        (gaussian_log_prob<double>(a, p, sigma) - gaussian_log_prob<double>(a, m, sigma)) / (2 * h);
    const double analytic = (a[static_cast<std::size_t>(j)] - mu[static_cast<std::size_t>(j)]) /
                            (sigma[static_cast<std::size_t>(j)] * sigma[static_cast<std::size_t>(j)]);
    CHECK(std::fabs(fd - analytic) / std::max(1.0, std::fabs(analytic)) <= 1e-5);
  }
}

TEST_CASE("action sampling: empirical mean within 3 sigma / sqrt(N) of mu") {
  const int J = 3;
  std::vector<double> mu{0.4, -1.2, 2.0}, sigma{0.5, 1.0, 0.2};
  const int N = 100000;
  std::vector<double> acc(J, 0.0);
  Rng rng(26);
  for (int n = 0; n < N; ++n) {
    auto a = sample_action<double>(mu, sigma, rng);
    for (int j = 0; j < J; ++j) acc[static_cast<std::size_t>(j)] += a[static_cast<std::size_t>(j)];
  }
  for (int j = 0; j < J; ++j) {
    const double mean = acc[static_cast<std::size_t>(j)] / N;
    CHECK(std::fabs(mean - mu[static_cast<std::size_t>(j)]) <=
          3.0 * sigma[static_cast<std::size_t>(j)] / std::sqrt(static_cast<double>(N)));
  }
}

TEST_CASE("aux heads: shapes, sigma clamp under extreme inputs") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 27);
  // blow up the vel head so raw log sigmas are extreme both ways
  for (std::size_t i = 0; i < model.vel_w2.numel(); ++i) model.vel_w2[i] *= 200.0;
  Rng rng(28);
  const int T = 5;
  auto norm = model.actor_norm.normalize_rows(random_obs(T, cfg.obs_dim, rng));
  Tape<double> tape(false);
  auto pv = ParamVars<double>::bind(tape, model, false);
  auto out = forward_sequence(tape, pv, cfg, norm, iota_positions(T));
  CHECK(out.contact_logits.val().cols() == cfg.contact_dim);
  CHECK(out.ref_pos.val().cols() == cfg.keypos_dim);
  CHECK(out.robot_pos.val().cols() == cfg.keypos_dim);
  CHECK(out.vel_mu.val().cols() == cfg.vel_dim);
  CHECK(out.vel_sigma.val().cols() == cfg.vel_dim);
  for (std::size_t i = 0; i < out.vel_sigma.val().numel(); ++i) {
    CHECK(out.vel_sigma.val()[i] >= cfg.aux_sigma_min - 1e-12);
    CHECK(out.vel_sigma.val()[i] <= cfg.aux_sigma_max + 1e-12);
  }
}

TEST_CASE("aux gradients reach the backbone but never an expert or router") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 29);
  Rng rng(30);
  const int T = 4;
  auto norm = model.actor_norm.normalize_rows(random_obs(T, cfg.obs_dim, rng));
  Tape<double> tape(true);
  auto pv = ParamVars<double>::bind(tape, model, true);
  auto out = forward_sequence(tape, pv, cfg, norm, iota_positions(T));
  auto loss = diffmath::sum(diffmath::add(
      diffmath::add(diffmath::sum(out.vel_mu), diffmath::sum(out.contact_logits)),
      diffmath::add(diffmath::sum(out.ref_pos), diffmath::sum(out.robot_pos))));
  tape.backward(loss);

  auto grad_norm = [](const Var<double>& v) {
    const auto& g = v.grad();
    double n = 0;
    for (std::size_t i = 0; i < g.numel(); ++i) n += std::fabs(g[i]);
    return n;
  };
  CHECK(grad_norm(pv.tok_w1) > 0.0);
  CHECK(grad_norm(pv.blocks[0].wq) > 0.0);
  CHECK(grad_norm(pv.vel_w1) > 0.0);
  for (const auto& blk : pv.blocks) {
    CHECK(grad_norm(blk.router_w) == 0.0);
    CHECK(grad_norm(blk.shared_w1) == 0.0);
    for (const auto& e : blk.expert_w1) CHECK(grad_norm(e) == 0.0);
    for (const auto& e : blk.expert_w2) CHECK(grad_norm(e) == 0.0);
  }
  // second attention block is also untouched: the tap sits before the first MoE
  CHECK(grad_norm(pv.blocks[1].wq) == 0.0);
  CHECK(grad_norm(pv.act_w1) == 0.0);
}

TEST_CASE("critic: deterministic, sensitive to privileged features, gradient checks") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 31);
  Rng rng(32);
  std::vector<double> obs(static_cast<std::size_t>(cfg.critic_obs_dim));
  for (auto& v : obs) v = uniform(rng, -1, 1);
  const double v1 = critic_value(model, obs);
  const double v2 = critic_value(model, obs);
  CHECK(v1 == v2);

  // privileged part occupies the tail; perturbing it must move the value
  auto priv = obs;
  priv[priv.size() - 1] += 0.5;
  priv[priv.size() - 3] -= 0.5;
  CHECK(critic_value(model, priv) != v1);

  // gradient of the tape-side critic vs finite differences
  Tensor<double> weights(1, cfg.critic_obs_dim);
  for (int i = 0; i < cfg.critic_obs_dim; ++i) weights(0, i) = obs[static_cast<std::size_t>(i)];
  const double err = testutil::fd_check<double>(
      {model.v_w1, model.v_b1, model.v_w3},
      [&](Tape<double>& t, std::vector<Var<double>>& vars) {
        ParamVars<double> pv = ParamVars<double>::bind(t, model, false);
        pv.v_w1 = vars[0];
        pv.v_b1 = vars[1];
        pv.v_w3 = vars[2];
        return diffmath::sum(critic_forward(t, pv, weights));
      });
  CHECK(err <= 1e-5);
}

TEST_CASE("parameter accounting: config arithmetic equals the allocated model") {
  auto cfg = tiny_config();
  auto model = make_model<double>(cfg, 33);
  const auto from_cfg = count_params(cfg);
  const auto from_model = model.param_count();
  CHECK(from_cfg.total == from_model.total);
  CHECK(from_cfg.activated == from_model.activated);
  CHECK(from_cfg.aux_heads == from_model.aux_heads);
  CHECK(from_cfg.critic == from_model.critic);
  CHECK(from_cfg.activated < from_cfg.total);
}

TEST_CASE("checkpoint: bit round trip and loud config mismatch") {
  auto cfg = tiny_config();
  auto model = make_model<float>(cfg, 35);
  // make the normalizer state non-trivial
  Rng rng(36);
  std::vector<float> obs(static_cast<std::size_t>(cfg.obs_dim));
  for (int n = 0; n < 20; ++n) {
    for (auto& v : obs) v = static_cast<float>(uniform(rng, -1, 1));
    tokenize(model, obs, NormMode::Train);
  }
  model.actor_norm.commit();

  const auto path = std::filesystem::temp_directory_path() / "motrack_test_ckpt.mckp";
  save_checkpoint(model, path);
  auto back = load_checkpoint<float>(path);
  CHECK(back.state_hash() == model.state_hash());
  CHECK(model_config_to_json(back.cfg) == model_config_to_json(cfg));

  auto other = cfg;
  other.hidden = 64;
  other.validate();
  CHECK_THROWS(load_checkpoint_expect<float>(path, other));
  CHECK_THROWS(load_checkpoint<double>(path));  // dtype mismatch fails loudly
  CHECK_NOTHROW(load_checkpoint_expect<float>(path, cfg));
}
