// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "motrack/io/container.hpp"
#include "motrack/policy/model.hpp"

namespace motrack::policy {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

namespace detail {
template <std::floating_point S>
const char* dtype_name() {
  if constexpr (std::is_same_v<S, double>) return "f64";
  else return "f32";
}

template <std::floating_point S>
void add_blob(io::ContainerWriter& w, const std::string& name, const Tensor<S>& t) {
  if constexpr (std::is_same_v<S, double>) w.add_f64(name, std::span<const double>(t.data(), t.numel()));
  else w.add_f32(name, std::span<const float>(t.data(), t.numel()));
}

template <std::floating_point S>
void read_blob(const io::ContainerReader& r, const std::string& name, Tensor<S>& t) {
  if constexpr (std::is_same_v<S, double>) {
    auto v = r.f64(name);
    if (v.size() != t.numel()) fail("checkpoint: size mismatch for '" + name + "'");
    std::copy(v.begin(), v.end(), t.data());
  } else {
    auto v = r.f32(name);
    if (v.size() != t.numel()) fail("checkpoint: size mismatch for '" + name + "'");
    std::copy(v.begin(), v.end(), t.data());
  }
}
}  // namespace detail

/// Versioned binary checkpoint: config echo, named parameter blobs, both EMA
/// normalizer states.
template <std::floating_point S>
void save_checkpoint(const PolicyModel<S>& model, const std::filesystem::path& path) {
  io::ContainerWriter w("MCKP", kCheckpointVersion);
  w.meta()["config"] = model_config_to_json(model.cfg);
  w.meta()["dtype"] = detail::dtype_name<S>();
  model.visit_params([&](const std::string& name, const Tensor<S>& t) { detail::add_blob(w, name, t); });
  detail::add_blob(w, "norm.actor.mean", model.actor_norm.mean);
  detail::add_blob(w, "norm.actor.var", model.actor_norm.var);
  detail::add_blob(w, "norm.actor.pending_mean", model.actor_norm.pending_mean);
  detail::add_blob(w, "norm.actor.pending_var", model.actor_norm.pending_var);
  detail::add_blob(w, "norm.critic.mean", model.critic_norm.mean);
  detail::add_blob(w, "norm.critic.var", model.critic_norm.var);
  detail::add_blob(w, "norm.critic.pending_mean", model.critic_norm.pending_mean);
  detail::add_blob(w, "norm.critic.pending_var", model.critic_norm.pending_var);
  w.write_file(path);
}

/// Loads a checkpoint; the stored config defines the model shape.
template <std::floating_point S>
PolicyModel<S> load_checkpoint(const std::filesystem::path& path) {
  auto r = io::ContainerReader::from_file(path, "MCKP");
  if (r.version() != kCheckpointVersion)
    fail("checkpoint: unsupported version " + std::to_string(r.version()));
  if (r.meta().at("dtype").get<std::string>() != detail::dtype_name<S>())
    fail("checkpoint: dtype mismatch (file is " + r.meta().at("dtype").get<std::string>() + ")");
  PolicyModel<S> model;
  model.cfg = model_config_from_json(r.meta().at("config"));
  Rng rng(0);
  model.init(rng);  // allocates shapes; every tensor is then overwritten
  model.visit_params([&](const std::string& name, Tensor<S>& t) { detail::read_blob(r, name, t); });
  detail::read_blob(r, "norm.actor.mean", model.actor_norm.mean);
  detail::read_blob(r, "norm.actor.var", model.actor_norm.var);
  detail::read_blob(r, "norm.actor.pending_mean", model.actor_norm.pending_mean);
  detail::read_blob(r, "norm.actor.pending_var", model.actor_norm.pending_var);
  detail::read_blob(r, "norm.critic.mean", model.critic_norm.mean);
  detail::read_blob(r, "norm.critic.var", model.critic_norm.var);
  detail::read_blob(r, "norm.critic.pending_mean", model.critic_norm.pending_mean);
  detail::read_blob(r, "norm.critic.pending_var", model.critic_norm.pending_var);
  return model;
}

/// Loads and verifies the stored config equals the expected one; fails loudly
/// on any mismatch.
template <std::floating_point S>
PolicyModel<S> load_checkpoint_expect(const std::filesystem::path& path, const ModelConfig& expect) {
  auto model = load_checkpoint<S>(path);
  if (model_config_to_json(model.cfg) != model_config_to_json(expect))
    fail("checkpoint: config mismatch between file and run configuration");
  return model;
}

}  // namespace motrack::policy
