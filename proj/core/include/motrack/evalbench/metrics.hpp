// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "motrack/kvruntime/kv_cache.hpp"
#include "motrack/simenv/env.hpp"

namespace motrack::evalbench {

using policy::PolicyModel;

/// One evaluated control step: the post-step state against its clip frame.
struct FrameRecord {
  simenv::EnvState state;
  int frame = 0;
};

struct ClipMetrics {
  std::string clip_id;
  std::string source;
  int frames = 0;
  double mpkpe_mm = 0.0;       // mean per-keypoint global position error
  double mpjpe_rad = 0.0;      // mean per-joint angle error
  double vel_mm_per_frame = 0.0;  // root velocity error at the control rate
  bool success = false;        // root height within the threshold throughout
  std::string termination_reason = "max_length";  // first rule that would fire
  int termination_frame = -1;
};

inline constexpr double kSuccessHeightThreshold = 0.25;  // m

/// Pure metric evaluation over collected frames; the scalar-loop oracle in
/// the tests recomputes this from the same records.
ClipMetrics compute_clip_metrics(std::span<const FrameRecord> records,
                                 const motiondata::MotionClip& clip, const simenv::RobotConfig& robot);

struct SourceAggregate {
  std::string source;
  int clips = 0;
  double mpkpe_mm = 0.0, mpjpe_rad = 0.0, vel_mm_per_frame = 0.0;
  double success_rate = 0.0;  // percent
};

struct EvalReport {
  std::vector<ClipMetrics> per_clip;
  std::vector<SourceAggregate> per_source;
  // macro: unweighted mean of per-source means; micro: per-clip mean
  SourceAggregate macro;
  SourceAggregate micro;
};

/// Deterministic evaluation rollout of one clip: noise, randomization and
/// early termination off, mean action, KV-cached inference from frame 0.
/// Also records the first early-termination rule that would have fired.
ClipMetrics eval_clip(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int clip_index);
ClipMetrics eval_clip(PolicyModel<double>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int clip_index);

/// Evaluates every clip, grouping by source tag with macro averaging.
EvalReport eval_suite(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int threads = 1);
EvalReport eval_suite(PolicyModel<double>& model, const simenv::EnvConfig& env_cfg,
                      motiondata::ClipLibraryPtr clips, int threads = 1);

/// Line-delimited per-clip records plus a summary block.
void write_report(const EvalReport& report, const std::filesystem::path& path);
nlohmann::json report_summary_json(const EvalReport& report);

/// Per-step state dump of one evaluation rollout (inspection artifact).
void dump_rollout(PolicyModel<float>& model, const simenv::EnvConfig& env_cfg,
                  motiondata::ClipLibraryPtr clips, int clip_index, const std::filesystem::path& path);

}  // namespace motrack::evalbench
