// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force scalar-loop implementations of the auxiliary objectives and the
// dead-expert margin loss, written directly from their formulas. The tests
// feed these the same predictions/targets as the production loss graph.

#include <cmath>
#include <vector>

#include "motrack/trainer/ppo.hpp"

namespace motrack::testoracle {

/// Per-step head predictions extracted from a forward pass.
struct AuxPredictions {
  int B = 0, T = 0, vel_dim = 0, contact_dim = 0, keypos_dim = 0;
  std::vector<double> vel_mu, vel_sigma;  // B*T*vel_dim
  std::vector<double> logits;             // B*T*contact_dim
  std::vector<double> ref_pos, rob_pos;   // B*T*keypos_dim
  std::size_t idx(int b, int t) const { return static_cast<std::size_t>(b) * T + t; }
};

template <std::floating_point S>
double oracle_l_vel(const trainer::RolloutBatch<S>& batch, const AuxPredictions& p) {
  double acc = 0.0;
  std::uint64_t n = 0;
  for (int b = 0; b < batch.B; ++b)
    for (int t = 0; t < batch.T; ++t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) continue;
      ++n;
      double inner = 0.0;
      for (int j = 0; j < p.vel_dim; ++j) {
        const double v = static_cast<double>(batch.vel_target[at * p.vel_dim + j]);
        const double mu = p.vel_mu[p.idx(b, t) * p.vel_dim + j];
        const double sig = p.vel_sigma[p.idx(b, t) * p.vel_dim + j];
        const double z = (v - mu) / sig;
        inner += z * z + 2.0 * std::log(sig);
      }
      acc += 0.5 * inner;
    }
  return acc / static_cast<double>(n);
}

template <std::floating_point S>
double oracle_l_contact(const trainer::RolloutBatch<S>& batch, const AuxPredictions& p) {
  double acc = 0.0;
  std::uint64_t n = 0;
  for (int b = 0; b < batch.B; ++b)
    for (int t = 0; t < batch.T; ++t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) continue;
      ++n;
      for (int k = 0; k < p.contact_dim; ++k) {
        const double l = p.logits[p.idx(b, t) * p.contact_dim + k];
        const double c = static_cast<double>(batch.contact_target[at * p.contact_dim + k]);
        // BCE with logits: max(l,0) - l c + log(1 + exp(-|l|))
        acc += std::max(l, 0.0) - l * c + std::log1p(std::exp(-std::fabs(l)));
      }
    }
  return acc / (static_cast<double>(n) * p.contact_dim);
}

template <std::floating_point S>
double oracle_l_positions(const trainer::RolloutBatch<S>& batch, const AuxPredictions& p, bool reference) {
  double acc = 0.0;
  std::uint64_t n = 0;
  for (int b = 0; b < batch.B; ++b)
    for (int t = 0; t < batch.T; ++t) {
      const auto at = batch.idx(b, t);
      if (!batch.valid[at]) continue;
      ++n;
      for (int k = 0; k < p.keypos_dim; ++k) {
        const double tgt = static_cast<double>(reference ? batch.refpos_target[at * p.keypos_dim + k]
                                                         : batch.robpos_target[at * p.keypos_dim + k]);
        const double pred = reference ? p.ref_pos[p.idx(b, t) * p.keypos_dim + k]
                                      : p.rob_pos[p.idx(b, t) * p.keypos_dim + k];
        acc += (pred - tgt) * (pred - tgt);
      }
    }
  // 1 / (3 N K_p): keypos_dim is already 3 K_p
  return acc / (static_cast<double>(n) * p.keypos_dim);
}

/// Double loop over (valid tokens x dead experts) per layer, averaged.
template <std::floating_point S>
double oracle_l_dead(std::span<const trainer::RouterStats<S>> layers) {
  double total = 0.0;
  for (const auto& layer : layers) {
    std::vector<int> dead;
    for (int e = 0; e < layer.scores.cols(); ++e)
      if (layer.counts[static_cast<std::size_t>(e)] == 0) dead.push_back(e);
    std::uint64_t n = 0;
    for (auto v : layer.valid) n += v;
    if (dead.empty() || n == 0) continue;
    double acc = 0.0;
    for (int t = 0; t < layer.scores.rows(); ++t) {
      if (!layer.valid[static_cast<std::size_t>(t)]) continue;
      for (int e : dead) {
        const double x = static_cast<double>(layer.tau[static_cast<std::size_t>(t)]) -
                         static_cast<double>(layer.scores(t, e));
        if (x > 0) acc += x;
      }
    }
    total += acc / (static_cast<double>(n) * static_cast<double>(dead.size()));
  }
  return total / static_cast<double>(layers.size());
}

}  // namespace motrack::testoracle
