// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "motrack/diffmath/ops.hpp"

namespace motrack::testutil {

using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

inline double rel_err(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

/// Central finite differences of a scalar-valued graph builder with respect
/// to every entry of every input tensor; returns the max relative error vs
/// the tape gradient. Always runs in the scalar type of the inputs (tests use
/// 64-bit).
template <typename S>
double fd_check(std::vector<Tensor<S>> inputs,
                const std::function<Var<S>(Tape<S>&, std::vector<Var<S>>&)>& build,
                double h = 1e-5, double floor = 1e-6) {
  // analytic gradients
  Tape<S> tape(true, true);
  std::vector<Var<S>> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  Var<S> out = build(tape, vars);
  tape.backward(out);
  std::vector<Tensor<S>> analytic;
  for (const auto& v : vars) {
    analytic.push_back(v.grad().empty() ? Tensor<S>(inputs[analytic.size()].rows(), inputs[analytic.size()].cols())
                                        : v.grad());
  }

  auto eval = [&](const std::vector<Tensor<S>>& in) -> double {
    Tape<S> t2(false, false);
    std::vector<Var<S>> vs;
    for (const auto& x : in) vs.push_back(t2.leaf(x));
    return static_cast<double>(build(t2, vs).val().item());
  };

  double max_err = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      auto plus = inputs, minus = inputs;
      plus[k][i] += static_cast<S>(h);
      minus[k][i] -= static_cast<S>(h);
      const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
      max_err = std::max(max_err, rel_err(fd, static_cast<double>(analytic[k][i]), floor));
    }
  }
  return max_err;
}

}  // namespace motrack::testutil
