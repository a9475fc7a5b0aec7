// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
//
// mtrack: data generation/packing, training, evaluation, benchmarks and
// rollout dumps for the motion-tracking stack.
//
// Exit codes: 0 ok, 1 usage error, 2 runtime failure.

#include <iostream>

#include "CLI11.hpp"
#include "motrack/evalbench/bench.hpp"
#include "motrack/evalbench/metrics.hpp"
#include "motrack/motiondata/clip_io.hpp"
#include "motrack/motiondata/procgen.hpp"
#include "motrack/policy/checkpoint.hpp"
#include "motrack/trainer/loop.hpp"
#include "motrack/trainer/presets.hpp"
#include "motrack/trainer/run_config.hpp"

namespace {

using namespace motrack;
namespace fs = std::filesystem;

fs::path apply_out_root(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MOTRACK_OUT")) return fs::path(root) / p;
  return p;
}

simenv::RobotConfig robot_by_name(const std::string& name) {
  if (name == "biped8") return simenv::RobotConfig::biped8();
  if (name == "minimal2") return simenv::RobotConfig::minimal2();
  fail("unknown robot preset '" + name + "' (expected biped8 or minimal2)");
}

struct DataGenArgs {
  std::string out;
  std::string heldout_out;
  std::string preset;
  std::string robot = "biped8";
  std::string families = "stand,sine,spline,crouch,jitter";
  int clips_per_family = 4;
  double min_seconds = 3.0, max_seconds = 5.0;
  double jitter_amplitude = 0.03;
  std::uint64_t seed = 0;
};

int run_data_gen(const DataGenArgs& a) {
  if (a.preset == "sine-track") {
    auto setup = trainer::make_sine_track_setup();
    motiondata::pack_library(setup.train, apply_out_root(a.out));
    std::cout << "wrote " << setup.train.size() << " clips to " << a.out << "\n";
    if (!a.heldout_out.empty()) {
      motiondata::pack_library(setup.heldout, apply_out_root(a.heldout_out));
      std::cout << "wrote " << setup.heldout.size() << " held-out clips to " << a.heldout_out << "\n";
    }
    return 0;
  }
  if (!a.preset.empty()) fail("unknown preset '" + a.preset + "'");
  motiondata::ProcGenSpec spec;
  spec.robot = robot_by_name(a.robot);
  spec.clips_per_family = a.clips_per_family;
  spec.min_seconds = a.min_seconds;
  spec.max_seconds = a.max_seconds;
  spec.jitter_amplitude = a.jitter_amplitude;
  spec.families.clear();
  std::stringstream ss(a.families);
  std::string fam;
  while (std::getline(ss, fam, ',')) spec.families.push_back(fam);
  Rng rng(a.seed);
  auto lib = motiondata::generate_procedural_clips(spec, rng);
  motiondata::pack_library(lib, apply_out_root(a.out));
  std::cout << "wrote " << lib.size() << " clips (" << spec.families.size() << " families) to " << a.out
            << "\n";
  return 0;
}

int run_data_pack(const std::vector<std::string>& inputs, const std::string& out) {
  motiondata::ClipLibrary lib;
  for (const auto& p : inputs) lib.add(motiondata::read_clip(p));
  motiondata::pack_library(lib, apply_out_root(out));
  std::cout << "packed " << lib.size() << " clips into " << out << "\n";
  return 0;
}

int run_data_inspect(const std::string& input, bool as_json) {
  nlohmann::json j;
  if (input.size() > 6 && input.substr(input.size() - 6) == ".mpack") {
    auto lib = motiondata::load_library(input);
    j["clips"] = nlohmann::json::array();
    for (int i = 0; i < lib.size(); ++i) {
      const auto& c = lib.clip(i);
      j["clips"].push_back({{"id", c.id},
                            {"source", c.source},
                            {"frames", c.frames()},
                            {"fps", c.fps},
                            {"joints", c.num_joints}});
    }
    j["count"] = lib.size();
  } else {
    auto c = motiondata::read_clip(input);
    j = {{"id", c.id},       {"source", c.source},          {"frames", c.frames()},
         {"fps", c.fps},     {"joints", c.num_joints},      {"key_bodies", c.num_key_bodies},
         {"end_effectors", c.num_end_effectors}};
  }
  if (as_json) {
    std::cout << j.dump() << "\n";
  } else if (j.contains("clips")) {
    std::cout << "library with " << j["count"] << " clips\n";
    for (const auto& c : j["clips"])
      std::cout << "  " << c["id"].get<std::string>() << "  source=" << c["source"].get<std::string>()
                << "  frames=" << c["frames"] << "\n";
  } else {
    std::cout << "clip " << j["id"].get<std::string>() << "  source=" << j["source"].get<std::string>()
              << "  frames=" << j["frames"] << "  fps=" << j["fps"] << "  joints=" << j["joints"] << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::int64_t seed = -1;
  int iterations = -1;
  int threads = -1;
};

int run_train(const TrainArgs& a) {
  trainer::RunConfig cfg = a.config.empty() ? trainer::RunConfig{} : trainer::load_run_config(a.config);
  if (!a.data.empty()) cfg.data_pack = a.data;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.iterations >= 0) cfg.iterations = a.iterations;
  if (a.threads >= 0) cfg.threads = a.threads;
  if (cfg.data_pack.empty()) fail("train: no data pack (set data_pack in the config or pass --data)");

  auto clips = std::make_shared<const motiondata::ClipLibrary>(motiondata::load_library(cfg.data_pack));
  trainer::TrainConfig tc;
  tc.env = cfg.env;
  tc.model = trainer::resolve_model_config(cfg);
  tc.ppo = cfg.ppo;
  tc.seed = cfg.seed;
  tc.iterations = cfg.iterations;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.threads = cfg.threads;
  tc.out_dir = apply_out_root(cfg.out_dir);

  trainer::Trainer<float> tr(tc, clips);
  save_resolved_config(cfg, tc.model, tc.out_dir / "resolved_config.json");
  if (!a.resume.empty()) {
    const fs::path dir(a.resume);
    tr.resume_from(dir / "checkpoint_final.mckp", dir / "optimizer_state.bin");
  }
  tr.run();
  const auto& last = tr.history().back();
  std::cout << "trained " << tr.history().size() << " iterations; reward_mean=" << last.reward_mean
            << " loss=" << last.loss.total << "\n";
  std::cout << "checkpoint: " << (tc.out_dir / "checkpoint_final.mckp").string() << "\n";
  return 0;
}

trainer::RunConfig config_for_artifacts(const std::string& explicit_config, const std::string& checkpoint) {
  if (!explicit_config.empty()) return trainer::load_run_config(explicit_config);
  const fs::path beside = fs::path(checkpoint).parent_path() / "resolved_config.json";
  if (fs::exists(beside)) return trainer::load_run_config(beside);
  fail("no config: pass --config or keep resolved_config.json next to the checkpoint");
}

struct EvalArgs {
  std::string checkpoint, data, config, out;
  bool as_json = false;
  int threads = 1;
};

int run_eval(const EvalArgs& a) {
  auto cfg = config_for_artifacts(a.config, a.checkpoint);
  auto mc = trainer::resolve_model_config(cfg);
  auto model = policy::load_checkpoint_expect<float>(a.checkpoint, mc);
  auto clips = std::make_shared<const motiondata::ClipLibrary>(motiondata::load_library(a.data));
  auto report = evalbench::eval_suite(model, cfg.env, clips, a.threads);
  if (!a.out.empty()) evalbench::write_report(report, apply_out_root(a.out));
  const auto summary = evalbench::report_summary_json(report);
  if (a.as_json) {
    std::cout << summary.dump() << "\n";
  } else {
    std::cout << "evaluated " << report.per_clip.size() << " clips over " << report.per_source.size()
              << " sources\n";
    for (const auto& s : report.per_source)
      std::cout << "  " << s.source << ": mpkpe=" << s.mpkpe_mm << "mm mpjpe=" << s.mpjpe_rad
                << "rad vel=" << s.vel_mm_per_frame << "mm/frame sr=" << s.success_rate << "%\n";
    std::cout << "macro: mpkpe=" << report.macro.mpkpe_mm << "mm mpjpe=" << report.macro.mpjpe_rad
              << "rad vel=" << report.macro.vel_mm_per_frame << "mm/frame sr=" << report.macro.success_rate
              << "%\n";
  }
  return 0;
}

struct BenchArgs {
  int context = 32;
  int steps = 200;
  int hidden = 64;
  int experts = 16;
  int blocks = 1;
  int batch = 8;
  int segment = 32;
  std::uint64_t seed = 0;
  bool as_json = false;
};

policy::ModelConfig bench_model_config(const BenchArgs& a) {
  auto robot = simenv::RobotConfig::biped8();
  auto layout = simenv::ObsLayout::build(robot, 10);
  auto mc = policy::ModelConfig::for_env(layout, robot.num_joints, robot.num_ee(), robot.num_key());
  mc.context = a.context;
  mc.hidden = a.hidden;
  mc.experts = a.experts;
  mc.blocks = a.blocks;
  mc.validate();
  return mc;
}

int run_bench_inference(const BenchArgs& a) {
  auto mc = bench_model_config(a);
  policy::PolicyModel<float> model;
  model.cfg = mc;
  Rng rng(a.seed);
  model.init(rng);
  auto b = evalbench::bench_inference(model, a.steps, a.seed + 1);
  if (a.as_json) {
    std::cout << nlohmann::json{{"cached_us_per_step", b.cached_us_per_step},
                                {"recompute_us_per_step", b.recompute_us_per_step},
                                {"speedup", b.speedup},
                                {"cached_flops_per_step", b.cached_flops_per_step},
                                {"recompute_tokens_per_step", b.recompute_tokens_per_step}}
                     .dump()
              << "\n";
    return 0;
  }
  std::cout << "inference latency, context=" << a.context << ", " << a.steps << " steps\n";
  std::cout << "  route               us/step   tokens/step\n";
  std::cout << "  cached (ring)       " << b.cached_us_per_step << "   1\n";
  std::cout << "  full recompute      " << b.recompute_us_per_step << "   " << b.recompute_tokens_per_step
            << "\n";
  std::cout << "  speedup             " << b.speedup << "x\n";
  std::cout << "  cached MACs/step    " << b.cached_flops_per_step << "\n";
  return 0;
}

int run_bench_training(const BenchArgs& a) {
  auto mc = bench_model_config(a);
  mc.context = a.context;
  policy::PolicyModel<float> model;
  model.cfg = mc;
  Rng rng(a.seed);
  model.init(rng);
  auto b = evalbench::bench_training<float>(model, a.batch, a.segment, a.seed + 1);
  if (a.as_json) {
    std::cout << nlohmann::json{{"sequence_seconds", b.sequence_seconds},
                                {"steplevel_seconds", b.steplevel_seconds},
                                {"speedup", b.speedup},
                                {"sequence_passes", b.sequence_passes},
                                {"steplevel_passes", b.steplevel_passes}}
                     .dump()
              << "\n";
    return 0;
  }
  std::cout << "training update, B=" << a.batch << " T=" << a.segment << " C=" << a.context << "\n";
  std::cout << "  route            seconds    forward passes\n";
  std::cout << "  sequence-level   " << b.sequence_seconds << "   " << b.sequence_passes << "\n";
  std::cout << "  step-level       " << b.steplevel_seconds << "   " << b.steplevel_passes << "\n";
  std::cout << "  speedup          " << b.speedup << "x\n";
  return 0;
}

struct RolloutArgs {
  std::string checkpoint, data, clip, config, out;
};

int run_rollout(const RolloutArgs& a) {
  auto cfg = config_for_artifacts(a.config, a.checkpoint);
  auto mc = trainer::resolve_model_config(cfg);
  auto model = policy::load_checkpoint_expect<float>(a.checkpoint, mc);
  auto clips = std::make_shared<const motiondata::ClipLibrary>(motiondata::load_library(a.data));
  int index = -1;
  for (int i = 0; i < clips->size(); ++i)
    if (clips->clip(i).id == a.clip) index = i;
  if (index < 0) fail("rollout: clip '" + a.clip + "' not found in " + a.data);
  evalbench::dump_rollout(model, cfg.env, clips, index, apply_out_root(a.out));
  std::cout << "rollout of '" << a.clip << "' written to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion tracking: data, training, evaluation and benchmarks"};
  app.require_subcommand(1);

  auto* data = app.add_subcommand("data", "generate, pack and inspect motion clips");
  data->require_subcommand(1);
  DataGenArgs gen_args;
  auto* gen = data->add_subcommand("gen", "generate procedural clips into a packed library");
  gen->add_option("--out", gen_args.out, "output .mpack path")->required();
  gen->add_option("--heldout-out", gen_args.heldout_out, "held-out .mpack path (presets only)");
  gen->add_option("--preset", gen_args.preset, "task preset (sine-track)");
  gen->add_option("--robot", gen_args.robot, "robot preset (biped8|minimal2)");
  gen->add_option("--families", gen_args.families, "comma-separated clip families");
  gen->add_option("--clips-per-family", gen_args.clips_per_family);
  gen->add_option("--min-seconds", gen_args.min_seconds);
  gen->add_option("--max-seconds", gen_args.max_seconds);
  gen->add_option("--jitter-amplitude", gen_args.jitter_amplitude);
  gen->add_option("--seed", gen_args.seed);

  std::vector<std::string> pack_inputs;
  std::string pack_out;
  auto* pack = data->add_subcommand("pack", "pack .mclip files into a library");
  pack->add_option("--out", pack_out, "output .mpack path")->required();
  pack->add_option("inputs", pack_inputs, "input .mclip files")->required();

  std::string inspect_input;
  bool inspect_json = false;
  auto* inspect = data->add_subcommand("inspect", "describe a clip or library");
  inspect->add_option("input", inspect_input, "path to .mclip or .mpack")->required();
  inspect->add_flag("--json", inspect_json, "machine-readable output");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run PPO training");
  train->add_option("--config", train_args.config, "run config JSON");
  train->add_option("--data", train_args.data, "training .mpack (overrides config)");
  train->add_option("--out", train_args.out, "output directory (overrides config)");
  train->add_option("--seed", train_args.seed, "seed (overrides config)");
  train->add_option("--iterations", train_args.iterations, "iterations (overrides config)");
  train->add_option("--threads", train_args.threads, "rollout worker threads");
  train->add_option("--resume", train_args.resume, "run directory to resume from");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a clip library");
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--data", eval_args.data, "evaluation .mpack")->required();
  eval->add_option("--config", eval_args.config, "run config JSON (default: next to checkpoint)");
  eval->add_option("--out", eval_args.out, "report .jsonl path");
  eval->add_option("--threads", eval_args.threads);
  eval->add_flag("--json", eval_args.as_json, "print the summary as JSON");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "efficiency benchmarks");
  bench->require_subcommand(1);
  auto* bi = bench->add_subcommand("inference", "cached step vs full-window recompute");
  bi->add_option("--context", bench_args.context);
  bi->add_option("--steps", bench_args.steps);
  bi->add_option("--hidden", bench_args.hidden);
  bi->add_option("--experts", bench_args.experts);
  bi->add_option("--blocks", bench_args.blocks);
  bi->add_option("--seed", bench_args.seed);
  bi->add_flag("--json", bench_args.as_json);
  auto* bt = bench->add_subcommand("training", "sequence-level vs step-level update");
  bt->add_option("--batch", bench_args.batch);
  bt->add_option("--segment", bench_args.segment);
  bt->add_option("--context", bench_args.context);
  bt->add_option("--hidden", bench_args.hidden);
  bt->add_option("--experts", bench_args.experts);
  bt->add_option("--seed", bench_args.seed);
  bt->add_flag("--json", bench_args.as_json);

  RolloutArgs rollout_args;
  auto* rollout = app.add_subcommand("rollout", "dump a per-step evaluation rollout");
  rollout->add_option("--checkpoint", rollout_args.checkpoint)->required();
  rollout->add_option("--data", rollout_args.data)->required();
  rollout->add_option("--clip", rollout_args.clip, "clip id")->required();
  rollout->add_option("--config", rollout_args.config);
  rollout->add_option("--out", rollout_args.out, "output .jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit cleanly, usage errors are 1
  }

  try {
    if (gen->parsed()) return run_data_gen(gen_args);
    if (pack->parsed()) return run_data_pack(pack_inputs, pack_out);
    if (inspect->parsed()) return run_data_inspect(inspect_input, inspect_json);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (bi->parsed()) return run_bench_inference(bench_args);
    if (bt->parsed()) return run_bench_training(bench_args);
    if (rollout->parsed()) return run_rollout(rollout_args);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
