// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/io/container.hpp"
#include "motrack/policy/checkpoint.hpp"
#include "motrack/policy/forward.hpp"

namespace motrack::trainer {

using policy::ParamVars;
using policy::PolicyModel;

/// Adam with decoupled weight decay over the model's parameter tensors.
template <std::floating_point S>
class AdamW {
 public:
  AdamW(PolicyModel<S>& model, double lr, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 0.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
    model.visit_params([&](const std::string&, diffmath::Tensor<S>& t) {
      m_.emplace_back(t.rows(), t.cols());
      v_.emplace_back(t.rows(), t.cols());
    });
  }

  std::int64_t steps() const { return t_; }
  double lr() const { return lr_; }

  /// Applies one step from the gradients accumulated on the tape for the
  /// bound vars (pv.ordered is aligned with visit_params order).
  void step(PolicyModel<S>& model, diffmath::Tape<S>& tape, const ParamVars<S>& pv) {
    std::size_t i = 0;
    std::vector<const diffmath::Tensor<S>*> grads(pv.ordered.size(), nullptr);
    for (std::size_t k = 0; k < pv.ordered.size(); ++k) {
      const auto& g = tape.grad_of(pv.ordered[k].id);
      grads[k] = g.empty() ? nullptr : &g;
    }
    apply(model, [&](std::size_t k) { return grads[k]; });
    (void)i;
  }

  /// Applies one step from externally accumulated gradient tensors.
  void step_with_grads(PolicyModel<S>& model, std::span<const diffmath::Tensor<S>> grads) {
    apply(model, [&](std::size_t k) { return grads[k].empty() ? nullptr : &grads[k]; });
  }

  void save(io::ContainerWriter& w) const {
    w.meta()["adamw"] = {{"t", t_}, {"lr", lr_}, {"beta1", beta1_}, {"beta2", beta2_},
                         {"eps", eps_}, {"weight_decay", weight_decay_}};
    for (std::size_t k = 0; k < m_.size(); ++k) {
      policy::detail::add_blob(w, "adam.m." + std::to_string(k), m_[k]);
      policy::detail::add_blob(w, "adam.v." + std::to_string(k), v_[k]);
    }
  }

  void load(const io::ContainerReader& r) {
    const auto& j = r.meta().at("adamw");
    t_ = j.at("t").get<std::int64_t>();
    lr_ = j.at("lr").get<double>();
    beta1_ = j.at("beta1").get<double>();
    beta2_ = j.at("beta2").get<double>();
    eps_ = j.at("eps").get<double>();
    weight_decay_ = j.at("weight_decay").get<double>();
    for (std::size_t k = 0; k < m_.size(); ++k) {
      policy::detail::read_blob(r, "adam.m." + std::to_string(k), m_[k]);
      policy::detail::read_blob(r, "adam.v." + std::to_string(k), v_[k]);
    }
  }

 private:
  template <typename GradAt>
  void apply(PolicyModel<S>& model, GradAt grad_at) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t k = 0;
    model.visit_params([&](const std::string&, diffmath::Tensor<S>& p) {
      const diffmath::Tensor<S>* g = grad_at(k);
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double gi = g ? static_cast<double>((*g)[i]) : 0.0;
        m[i] = static_cast<S>(beta1_ * m[i] + (1.0 - beta1_) * gi);
        v[i] = static_cast<S>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
        const double mh = static_cast<double>(m[i]) / bc1;
        const double vh = static_cast<double>(v[i]) / bc2;
        double pi = static_cast<double>(p[i]);
        pi -= lr_ * weight_decay_ * pi;  // decoupled decay
        pi -= lr_ * mh / (std::sqrt(vh) + eps_);
        p[i] = static_cast<S>(pi);
      }
      ++k;
    });
  }

  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
  std::vector<diffmath::Tensor<S>> m_, v_;
};

}  // namespace motrack::trainer
