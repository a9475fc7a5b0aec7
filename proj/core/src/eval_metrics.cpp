// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#include "motrack/evalbench/metrics.hpp"

#include <fstream>
#include <thread>

namespace motrack::evalbench {

using simenv::BodyState;

ClipMetrics compute_clip_metrics(std::span<const FrameRecord> records,
                                 const motiondata::MotionClip& clip, const simenv::RobotConfig& robot) {
  if (records.empty()) fail("compute_clip_metrics: no frames");
  ClipMetrics m;
  m.clip_id = clip.id;
  m.source = clip.source;
  m.frames = static_cast<int>(records.size());

  const double dt = 1.0 / clip.fps;
  double pos_err = 0.0, joint_err = 0.0, vel_err = 0.0;
  bool success = true;
  std::vector<BodyState> body(static_cast<std::size_t>(robot.num_bodies()));
  for (const auto& rec : records) {
    const int f = clip.held(rec.frame);
    simenv::forward_kinematics(robot, rec.state.root, rec.state.root_vel, rec.state.q, rec.state.qd, body);
    const double* ref_key = clip.key_frame(f);
    double acc = 0.0;
    for (int k = 0; k < robot.num_key(); ++k) {
      const auto& b = body[static_cast<std::size_t>(robot.key_bodies[static_cast<std::size_t>(k)])];
      const double dx = b.pos.x - ref_key[3 * k + 0];
      const double dy = 0.0 - ref_key[3 * k + 1];
      const double dz = b.pos.z - ref_key[3 * k + 2];
      acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    pos_err += acc / robot.num_key();

    const double* ref_q = clip.joint_frame(f);
    double jacc = 0.0;
    for (int j = 0; j < robot.num_joints; ++j) jacc += std::fabs(rec.state.q[static_cast<std::size_t>(j)] - ref_q[j]);
    joint_err += jacc / robot.num_joints;

    const auto ref_vel = clip.vel(f);
    const double dvx = rec.state.root_vel.vx - ref_vel.vx;
    const double dvz = rec.state.root_vel.vz - ref_vel.vz;
    vel_err += std::sqrt(dvx * dvx + dvz * dvz);

    if (std::fabs(rec.state.root.z - clip.root_height[static_cast<std::size_t>(f)]) > kSuccessHeightThreshold)
      success = false;
  }
  const auto n = static_cast<double>(records.size());
  m.mpkpe_mm = 1000.0 * pos_err / n;
  m.mpjpe_rad = joint_err / n;
  m.vel_mm_per_frame = 1000.0 * dt * vel_err / n;
  m.success = success;
  return m;
}

namespace {

template <std::floating_point S>
ClipMetrics eval_clip_impl(PolicyModel<S>& model, const simenv::EnvConfig& env_cfg,
                           motiondata::ClipLibraryPtr clips, int clip_index,
                           std::vector<FrameRecord>* records_out,
                           std::vector<std::vector<S>>* actions_out) {
  simenv::EnvConfig cfg = env_cfg;
  cfg.enable_noise = false;
  cfg.enable_push = false;
  cfg.rand.enabled = false;
  cfg.enforce_early_termination = false;
  simenv::MotionEnv env(cfg, clips, 0);
  auto obs = env.reset_to(clip_index, 0, false);

  kvruntime::KVCache<S> cache(model.cfg);
  kvruntime::InferenceContext<S> ctx(model.cfg);

  const auto& clip = env.active_clip();
  std::vector<FrameRecord> records;
  records.reserve(static_cast<std::size_t>(clip.frames() - 1));
  std::string first_reason = "max_length";
  int first_frame = -1;

  std::vector<S> raw(static_cast<std::size_t>(model.cfg.obs_dim));
  for (int t = 0; t + 1 < clip.frames(); ++t) {
    for (int i = 0; i < model.cfg.obs_dim; ++i) raw[static_cast<std::size_t>(i)] = static_cast<S>(obs.actor[static_cast<std::size_t>(i)]);
    const auto& out = ctx.step(model, cache, raw, policy::NormMode::Eval);
    std::vector<double> action(out.mu.begin(), out.mu.end());  // deterministic mean action
    if (actions_out) actions_out->push_back(out.mu);
    auto step = env.step(action);
    records.push_back({env.state(), env.state().phase});
    if (step.reason && *step.reason != simenv::TerminationReason::MaxLength && first_frame < 0) {
      first_reason = simenv::termination_name(*step.reason);
      first_frame = env.state().phase;
    }
    obs = step.obs;
    if (step.done) break;
  }
  ClipMetrics m = compute_clip_metrics(records, clip, cfg.robot);
  m.termination_reason = first_reason;
  m.termination_frame = first_frame;
  if (records_out) *records_out = std::move(records);
  return m;
}

template <std::floating_point S>
EvalReport eval_suite_impl(PolicyModel<S>& model, const simenv::EnvConfig& env_cfg,
                           motiondata::ClipLibraryPtr clips, int threads) {
  EvalReport report;
  report.per_clip.resize(static_cast<std::size_t>(clips->size()));
  auto worker = [&](int lo, int hi) {
    // each worker copies the model: evaluation must not mutate shared state
    PolicyModel<S> local = model;
    for (int i = lo; i < hi; ++i)
      report.per_clip[static_cast<std::size_t>(i)] = eval_clip_impl<S>(local, env_cfg, clips, i, nullptr, nullptr);
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    worker(0, clips->size());
  } else {
    std::vector<std::thread> pool;
    const int per = (clips->size() + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const int lo = w * per, hi = std::min(clips->size(), lo + per);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  std::map<std::string, SourceAggregate> by_source;
  for (const auto& m : report.per_clip) {
    auto& agg = by_source[m.source];
    agg.source = m.source;
    agg.clips += 1;
    agg.mpkpe_mm += m.mpkpe_mm;
    agg.mpjpe_rad += m.mpjpe_rad;
    agg.vel_mm_per_frame += m.vel_mm_per_frame;
    agg.success_rate += m.success ? 100.0 : 0.0;
    report.micro.clips += 1;
    report.micro.mpkpe_mm += m.mpkpe_mm;
    report.micro.mpjpe_rad += m.mpjpe_rad;
    report.micro.vel_mm_per_frame += m.vel_mm_per_frame;
    report.micro.success_rate += m.success ? 100.0 : 0.0;
  }
  report.micro.source = "micro";
  if (report.micro.clips > 0) {
    report.micro.mpkpe_mm /= report.micro.clips;
    report.micro.mpjpe_rad /= report.micro.clips;
    report.micro.vel_mm_per_frame /= report.micro.clips;
    report.micro.success_rate /= report.micro.clips;
  }
  report.macro.source = "macro";
  for (auto& [name, agg] : by_source) {
    agg.mpkpe_mm /= agg.clips;
    agg.mpjpe_rad /= agg.clips;
    agg.vel_mm_per_frame /= agg.clips;
    agg.success_rate /= agg.clips;
    report.per_source.push_back(agg);
    report.macro.clips += agg.clips;
    report.macro.mpkpe_mm += agg.mpkpe_mm;
    report.macro.mpjpe_rad += agg.mpjpe_rad;
    report.macro.vel_mm_per_frame += agg.vel_mm_per_frame;
    report.macro.success_rate += agg.success_rate;
  }
  const auto ns = static_cast<double>(report.per_source.size());
  if (ns > 0) {
    report.macro.mpkpe_mm /= ns;
    report.macro.mpjpe_rad /= ns;
    report.macro.vel_mm_per_frame /= ns;
    report.macro.success_rate /= ns;
  }
  return report;
}

nlohmann::json clip_json(const ClipMetrics& m) {
  return {{"clip", m.clip_id},
          {"source", m.source},
          {"frames", m.frames},
          {"mpkpe_mm", m.mpkpe_mm},
          {"mpjpe_rad", m.mpjpe_rad},
          {"vel_mm_per_frame", m.vel_mm_per_frame},
          {"success", m.success},
          {"termination_reason", m.termination_reason},
          {"termination_frame", m.termination_frame}};
}

nlohmann::json agg_json(const SourceAggregate& a) {
  return {{"source", a.source},
          {"clips", a.clips},
          {"mpkpe_mm", a.mpkpe_mm},
          {"mpjpe_rad", a.mpjpe_rad},
          {"vel_mm_per_frame", a.vel_mm_per_frame},
          {"success_rate", a.success_rate}};
}

}  // namespace

ClipMetrics eval_clip(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int clip_index) {
  return eval_clip_impl<float>(model, env_cfg, clips, clip_index, nullptr, nullptr);
}

ClipMetrics eval_clip(PolicyModel<double>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int clip_index) {
  return eval_clip_impl<double>(model, env_cfg, clips, clip_index, nullptr, nullptr);
}

EvalReport eval_suite(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int threads) {
  return eval_suite_impl<float>(model, env_cfg, clips, threads);
}

EvalReport eval_suite(PolicyModel<double>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int threads) {
  return eval_suite_impl<double>(model, env_cfg, clips, threads);
}

nlohmann::json report_summary_json(const EvalReport& report) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& a : report.per_source) sources.push_back(agg_json(a));
  return {{"macro", agg_json(report.macro)}, {"micro", agg_json(report.micro)}, {"sources", sources}};
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("write_report: cannot open " + path.string());
  for (const auto& m : report.per_clip) f << clip_json(m).dump() << "\n";
  f << nlohmann::json{{"summary", report_summary_json(report)}}.dump() << "\n";
}

void dump_rollout(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                  motiondata::ClipLibraryPtr clips, int clip_index, const std::filesystem::path& path) {
  std::vector<FrameRecord> records;
  std::vector<std::vector<float>> actions;
  auto metrics = eval_clip_impl<float>(model, env_cfg, clips, clip_index, &records, &actions);
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("dump_rollout: cannot open " + path.string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& st = records[i].state;
    nlohmann::json j;
    j["t"] = records[i].frame;
    j["root"] = {st.root.x, st.root.z, st.root.pitch};
    j["root_vel"] = {st.root_vel.vx, st.root_vel.vz, st.root_vel.w};
    j["q"] = st.q;
    j["qd"] = st.qd;
    j["contacts"] = st.contact;
    j["action_mean"] = actions[i];
    f << j.dump() << "\n";
  }
  f << nlohmann::json{{"summary", clip_json(metrics)}}.dump() << "\n";
}

}  // namespace motrack::evalbench
