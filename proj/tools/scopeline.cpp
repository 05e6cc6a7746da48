#include <CLI11.hpp>

#include <iostream>

#include "scopeline/commands.hpp"

namespace cli = scopeline::cli;

int main(int argc, char** argv) {
  CLI::App app{"scopeline: multi-detector video pipeline and evaluation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  cli::RunOptions run;
  std::string run_config, run_input;
  auto* run_cmd = app.add_subcommand("run", "run the pipeline over a frame directory or dataset root");
  run_cmd->add_option("--config", run_config, "pipeline config JSON or a run manifest");
  run_cmd->add_option("--input", run_input, "video directory (with manifest.json) or dataset root");
  run_cmd->add_option("--output", run.output, "output directory")->required();
  run_cmd->add_option("--mode", run.mode, "execution mode")->check(CLI::IsMember({"sequential", "parallel"}));
  run_cmd->add_option("--ensemble", run.ensemble, "ensemble rule")->check(CLI::IsMember({"and", "size_aware"}));
  run_cmd->add_option("--short-edge-threshold", run.short_edge_threshold, "size-aware short-edge ratio");
  run_cmd->add_option("--iou-threshold", run.iou_threshold, "ensemble IoU threshold");
  run_cmd->add_option("--seed", run.seed, "synthetic seed (detector B uses seed + 1)");
  run_cmd->add_option("--fps", run.fps, "override stream fps");

  cli::EvalOptions ev;
  std::string ev_results, ev_annotations;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a results file against annotations");
  eval_cmd->add_option("--results,--input", ev_results, "results.jsonl from 'run'");
  eval_cmd->add_option("--annotations", ev_annotations, "annotation JSON Lines");
  eval_cmd->add_option("--output", ev.output, "report directory")->required();
  eval_cmd->add_option("--match", ev.match, "match criterion")->check(CLI::IsMember({"iou", "centroid"}));
  eval_cmd->add_option("--iou-threshold", ev.iou_threshold, "IoU needed for a match");
  eval_cmd->add_option("--fps", ev.fps, "video frame rate");
  eval_cmd->add_option("--merge-window", ev.merge_window, "FP incident merge window (frames)");
  eval_cmd->add_option("--model", ev.model, "model name in metrics.json");
  eval_cmd->add_option("--counts", ev.counts, "report TP,FP,FN directly instead of matching");

  cli::BenchOptions bench;
  std::string bench_config;
  auto* bench_cmd = app.add_subcommand("bench", "latency budget under simulated stage costs");
  bench_cmd->add_option("--config", bench_config, "pipeline config JSON");
  bench_cmd->add_option("--frames", bench.frames, "frames per scenario");
  bench_cmd->add_option("--latency-profile", bench.latency_profile, "gate,detA,detB milliseconds");
  bench_cmd->add_option("--width", bench.width);
  bench_cmd->add_option("--height", bench.height);

  cli::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a seeded synthetic dataset");
  gen_cmd->add_option("--output", gen.output, "dataset root")->required();
  gen_cmd->add_option("--videos", gen.spec.videos, "videos containing polyps");
  gen_cmd->add_option("--empty-videos", gen.spec.empty_videos, "videos without polyps");
  gen_cmd->add_option("--frames", gen.spec.frames, "frames per video");
  gen_cmd->add_option("--polyps", gen.spec.polyps, "polyps per video");
  gen_cmd->add_option("--blur-fraction", gen.spec.blur_fraction, "fraction of flat (blurry) frames");
  gen_cmd->add_option("--seed", gen.spec.seed);
  gen_cmd->add_option("--width", gen.spec.width);
  gen_cmd->add_option("--height", gen.spec.height);
  gen_cmd->add_option("--fps", gen.spec.fps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitConfig;
  }

  if (*run_cmd) {
    if (!run_config.empty()) run.config = run_config;
    if (!run_input.empty()) run.input = run_input;
    return cli::cmd_run(run, std::cout, std::cerr);
  }
  if (*eval_cmd) {
    if (!ev_results.empty()) ev.results = ev_results;
    if (!ev_annotations.empty()) ev.annotations = ev_annotations;
    return cli::cmd_eval(ev, std::cout, std::cerr);
  }
  if (*bench_cmd) {
    if (!bench_config.empty()) bench.config = bench_config;
    return cli::cmd_bench(bench, std::cout, std::cerr);
  }
  return cli::cmd_gen_synthetic(gen, std::cout, std::cerr);
}
