// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>
#include <span>

#include "motrack/common.hpp"

namespace motrack::policy {

/// Diagonal Gaussian log density.
template <std::floating_point S>
S gaussian_log_prob(std::span<const S> action, std::type_identity_t<std::span<const S>> mu,
                    std::type_identity_t<std::span<const S>> sigma) {
  const auto J = action.size();
  S acc{0};
  for (std::size_t j = 0; j < J; ++j) {
    const S z = (action[j] - mu[j]) / sigma[j];
    acc -= S{0.5} * z * z + std::log(sigma[j]);
  }
  acc -= static_cast<S>(0.5 * static_cast<double>(J) * std::log(2.0 * std::numbers::pi));
  return acc;
}

/// Draws a ~ N(mu, diag(sigma^2)).
template <std::floating_point S>
std::vector<S> sample_action(std::span<const S> mu, std::type_identity_t<std::span<const S>> sigma, Rng& rng) {
  std::vector<S> a(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j)
    a[j] = mu[j] + sigma[j] * static_cast<S>(gaussian(rng));
  return a;
}

/// Entropy of a diagonal Gaussian; state independent for a fixed sigma.
template <std::floating_point S>
S gaussian_entropy(std::span<const S> sigma) {
  S acc{0};
  for (S s : sigma) acc += std::log(s);
  acc += static_cast<S>(0.5 * static_cast<double>(sigma.size()) * std::log(2.0 * std::numbers::pi * std::numbers::e));
  return acc;
}

}  // namespace motrack::policy
