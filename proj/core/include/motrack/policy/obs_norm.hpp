// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "motrack/diffmath/tensor.hpp"

namespace motrack::policy {

/// Running per-feature mean/variance with exponential moving average updates.
///
/// Normalization always reads the `active` statistics; training-mode updates
/// accumulate into `pending`. `commit()` publishes pending -> active at the
/// iteration boundary, so log-probs recomputed during the update epochs see
/// exactly the statistics that produced the rollout actions.
template <std::floating_point S>
struct ObsNorm {
  diffmath::Tensor<S> mean, var;                  // active
  diffmath::Tensor<S> pending_mean, pending_var;  // updated by observe()
  S decay{};

  static constexpr S kVarFloor = static_cast<S>(1e-6);

  void init(int dim, S decay_) {
    decay = decay_;
    mean = diffmath::Tensor<S>(1, dim);
    var = diffmath::Tensor<S>::full(1, dim, S{1});
    pending_mean = mean;
    pending_var = var;
  }

  int dim() const { return mean.cols(); }

  /// EMA update: m <- rho m + (1-rho) x;  v <- rho v + (1-rho) (x - m_old)^2
  void observe(std::span<const S> x) {
    const S rho = decay;
    for (int i = 0; i < dim(); ++i) {
      const S xi = x[static_cast<std::size_t>(i)];
      const S m_old = pending_mean[static_cast<std::size_t>(i)];
      pending_mean[static_cast<std::size_t>(i)] = rho * m_old + (S{1} - rho) * xi;
      pending_var[static_cast<std::size_t>(i)] =
          rho * pending_var[static_cast<std::size_t>(i)] + (S{1} - rho) * (xi - m_old) * (xi - m_old);
    }
  }

  void commit() {
    mean = pending_mean;
    var = pending_var;
  }

  void normalize(std::span<const S> in, std::span<S> out) const {
    for (int i = 0; i < dim(); ++i) {
      const S v = std::max(var[static_cast<std::size_t>(i)], kVarFloor);
      out[static_cast<std::size_t>(i)] =
          (in[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) / std::sqrt(v);
    }
  }

  diffmath::Tensor<S> normalize_rows(const diffmath::Tensor<S>& raw) const {
    if (raw.cols() != dim()) fail("ObsNorm: feature dim mismatch");
    diffmath::Tensor<S> out(raw.rows(), raw.cols());
    for (int i = 0; i < raw.rows(); ++i) {
      normalize(std::span<const S>(raw.data() + static_cast<std::size_t>(i) * raw.cols(),
                                   static_cast<std::size_t>(raw.cols())),
                std::span<S>(out.data() + static_cast<std::size_t>(i) * out.cols(),
                             static_cast<std::size_t>(out.cols())));
    }
    return out;
  }
};

}  // namespace motrack::policy
