// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "motrack/diffmath/tensor.hpp"

namespace motrack::diffmath {

template <std::floating_point S>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; the tape owns storage.
template <std::floating_point S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<S>& val() const;
  const Tensor<S>& grad() const;
};

/// Reverse-mode gradient tape. Ops are recorded in execution order, which is
/// a topological order of the value graph, so one reverse sweep visits each
/// recorded op exactly once.
///
/// With recording disabled the same op functions act as an eager evaluator
/// (values are still stored on the tape, no backward closures are kept).
/// Finite-check mode scans every produced value and throws on NaN/Inf.
template <std::floating_point S>
class Tape {
 public:
  explicit Tape(bool recording = true, bool finite_checks = false)
      : recording_(recording), finite_checks_(finite_checks) {}

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  bool finite_checks() const { return finite_checks_; }
  void set_finite_checks(bool on) { finite_checks_ = on; }

  Var<S> alloc(Tensor<S> value, bool needs_grad, const char* op) {
    if (finite_checks_ && !value.finite()) {
      fail(std::string("diffmath: non-finite value produced by op '") + op + "'");
    }
    slots_.push_back(Slot{std::move(value), Tensor<S>{}, needs_grad && recording_});
    return Var<S>{this, static_cast<int>(slots_.size()) - 1};
  }

  /// Introduces a differentiable leaf (parameters).
  Var<S> leaf(Tensor<S> value) { return alloc(std::move(value), true, "leaf"); }

  /// Introduces a non-differentiable constant (data, targets, masks).
  Var<S> constant(Tensor<S> value) { return alloc(std::move(value), false, "constant"); }

  void record(std::function<void(Tape&)> backward) {
    if (recording_) nodes_.push_back(std::move(backward));
  }

  const Tensor<S>& value(int id) const { return slots_[id].value; }
  Tensor<S>& mutable_value(int id) { return slots_[id].value; }
  bool needs_grad(int id) const { return slots_[id].needs_grad; }

  bool has_grad(int id) const { return !slots_[id].grad.empty(); }

  /// Gradient buffer, allocated to zeros on first touch.
  Tensor<S>& grad(int id) {
    Slot& s = slots_[id];
    if (s.grad.empty()) s.grad.set_shape(s.value.shape());
    return s.grad;
  }

  const Tensor<S>& grad_of(int id) const {
    static const Tensor<S> kEmpty{};
    return slots_[id].grad.empty() ? kEmpty : slots_[id].grad;
  }

  /// Accumulates into the grad of `id` unless the slot opted out of grads.
  void accumulate(int id, const Tensor<S>& g) {
    if (!slots_[id].needs_grad) return;
    Tensor<S>& dst = grad(id);
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  }

  void backward(const Var<S>& out) {
    if (out.tape != this) fail("Tape::backward: var from another tape");
    if (value(out.id).numel() != 1) fail("Tape::backward: output must be scalar");
    if (!recording_) fail("Tape::backward: tape was not recording");
    grad(out.id)[0] = S{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_slots() const { return slots_.size(); }

  void reset() {
    slots_.clear();
    nodes_.clear();
  }

 private:
  struct Slot {
    Tensor<S> value;
    Tensor<S> grad;
    bool needs_grad = false;
  };
  std::deque<Slot> slots_;  // deque: slot references stay valid as ops append
  std::vector<std::function<void(Tape&)>> nodes_;
  bool recording_ = true;
  bool finite_checks_ = false;
};

template <std::floating_point S>
const Tensor<S>& Var<S>::val() const {
  return tape->value(id);
}

template <std::floating_point S>
const Tensor<S>& Var<S>::grad() const {
  return tape->grad_of(id);
}

}  // namespace motrack::diffmath
