// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "motrack/common.hpp"
#include "motrack/diffmath/tensor.hpp"

// Plain eager kernels for the allocation-free inference path. These are kept
// deliberately separate from the tape ops so the cached and recomputed routes
// share no structural code.
namespace motrack::diffmath::kernels {

/// Per-kernel multiply-accumulate counter for efficiency assertions.
struct OpCounter {
  std::uint64_t flops = 0;
  void add(std::uint64_t n) { flops += n; }
  void reset() { flops = 0; }
};

template <std::floating_point S>
void matvec(std::span<const S> x, const Tensor<S>& w, std::span<S> out, OpCounter* ctr = nullptr) {
  // out[j] = sum_i x[i] * w(i, j); w is [in x out], matching matmul([1 x in], w).
  const int in = w.rows(), on = w.cols();
  if (static_cast<int>(x.size()) != in || static_cast<int>(out.size()) != on) fail("matvec: size mismatch");
  for (int j = 0; j < on; ++j) out[j] = S{0};
  const S* W = w.data();
  for (int i = 0; i < in; ++i) {
    const S xi = x[static_cast<std::size_t>(i)];
    const S* wrow = W + static_cast<std::size_t>(i) * on;
    for (int j = 0; j < on; ++j) out[j] += xi * wrow[j];
  }
  if (ctr) ctr->add(static_cast<std::uint64_t>(in) * on);
}

template <std::floating_point S>
void add_inplace(std::span<S> x, std::span<const S> y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

template <std::floating_point S>
void axpy(std::span<S> x, S a, std::span<const S> y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * y[i];
}

template <std::floating_point S>
void rmsnorm(std::span<const S> x, std::span<const S> gain, S eps, std::span<S> out) {
  S ms{0};
  for (S v : x) ms += v * v;
  ms /= static_cast<S>(x.size());
  const S inv = S{1} / std::sqrt(ms + eps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * x[i] * inv;
}

template <std::floating_point S>
void silu_inplace(std::span<S> x) {
  for (auto& v : x) v = v / (S{1} + std::exp(-v));
}

template <std::floating_point S>
void sigmoid_inplace(std::span<S> x) {
  for (auto& v : x) v = S{1} / (S{1} + std::exp(-v));
}

/// Stabilized in-place softmax over the first `n` entries.
template <std::floating_point S>
void softmax_inplace(std::span<S> x, std::size_t n) {
  S mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  S denom{0};
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    denom += x[i];
  }
  for (std::size_t i = 0; i < n; ++i) x[i] /= denom;
}

/// In-place adjacent-pair rotary embedding at one position.
template <std::floating_point S>
void rope_inplace(std::span<S> x, std::int64_t position, double base = 10000.0) {
  const int d = static_cast<int>(x.size());
  for (int p = 0; p < d / 2; ++p) {
    const double ang = static_cast<double>(position) *
                       std::pow(base, -2.0 * static_cast<double>(p) / static_cast<double>(d));
    const S c = static_cast<S>(std::cos(ang)), s = static_cast<S>(std::sin(ang));
    const S a = x[static_cast<std::size_t>(2 * p)], b = x[static_cast<std::size_t>(2 * p + 1)];
    x[static_cast<std::size_t>(2 * p)] = a * c - b * s;
    x[static_cast<std::size_t>(2 * p + 1)] = a * s + b * c;
  }
}

}  // namespace motrack::diffmath::kernels
