#include "scopeline/commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "scopeline/io.hpp"
#include "scopeline/report.hpp"

namespace scopeline::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void init_logging() {
  static const bool once = [] {
    auto logger = spdlog::stderr_color_mt("scopeline");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SCOPELINE_LOG")) {
      spdlog::set_level(spdlog::level::from_str(env));
    }
    return true;
  }();
  (void)once;
}

namespace {

struct LoadedConfig {
  PipelineConfig config;
  std::optional<fs::path> manifest_input;
};

// A run manifest carries the pipeline config under "config".
LoadedConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("config file '{}' does not exist", path.string()));
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file '{}': {}", path.string(), e.what()));
  }
  LoadedConfig out;
  if (j.is_object() && j.contains("tool_version") && j.contains("config")) {
    out.config = pipeline_config_from_json(j.at("config"));
    if (auto it = j.find("input"); it != j.end() && it->contains("path")) {
      out.manifest_input = fs::path(it->at("path").get<std::string>());
    }
  } else {
    out.config = pipeline_config_from_json(j);
  }
  return out;
}

std::vector<fs::path> discover_videos(const fs::path& input) {
  if (!fs::is_directory(input)) {
    throw std::runtime_error(fmt::format("input '{}' is not a directory", input.string()));
  }
  if (fs::exists(input / "manifest.json")) return {input};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw std::runtime_error(fmt::format("no manifest.json in '{}' or its subdirectories", input.string()));
  }
  return dirs;
}

std::vector<double> parse_number_list(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{} '{}': '{}' is not a number", what, text, item));
    }
  }
  if (out.size() != expected) {
    throw ConfigError(fmt::format("{} '{}' needs {} comma-separated values", what, text, expected));
  }
  return out;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  init_logging();
  PipelineConfig cfg;
  fs::path input;
  try {
    std::optional<fs::path> manifest_input;
    if (opts.config) {
      LoadedConfig loaded = load_config(*opts.config);
      cfg = loaded.config;
      manifest_input = loaded.manifest_input;
    }
    if (opts.mode) cfg.mode = execution_mode_from_string(*opts.mode);
    if (opts.ensemble) cfg.ensemble.mode = ensemble_mode_from_string(*opts.ensemble);
    if (opts.short_edge_threshold) cfg.ensemble.short_edge_ratio_threshold = *opts.short_edge_threshold;
    if (opts.iou_threshold) cfg.ensemble.iou_threshold = *opts.iou_threshold;
    if (opts.seed) {
      cfg.detector_a.synthetic.seed = *opts.seed;
      cfg.detector_b.synthetic.seed = *opts.seed + 1;
    }
    if (opts.fps) cfg.fps = *opts.fps;
    cfg.validate();
    if (opts.input) {
      input = *opts.input;
    } else if (manifest_input) {
      input = *manifest_input;
    } else {
      throw ConfigError("no --input given and the config is not a run manifest");
    }
    if (opts.output.empty()) throw ConfigError("--output is required");
  } catch (const std::exception& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }

  std::vector<fs::path> videos;
  try {
    videos = discover_videos(input);
  } catch (const std::exception& e) {
    fmt::print(err, "stream error: {}\n", e.what());
    return kExitStream;
  }

  std::optional<Pipeline> pipeline;
  try {
    pipeline.emplace(Pipeline::from_config(cfg));
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }

  std::string results;
  std::vector<PipelineResult> timings;
  ordered_json video_list = ordered_json::array();
  RunSummary total;
  try {
    for (const fs::path& dir : videos) {
      FrameStream stream(dir, cfg.fps);
      AnnotationIndex truth;
      if (fs::exists(dir / "annotations.jsonl")) truth = read_annotations(dir / "annotations.jsonl");
      const auto& frames_truth = truth[stream.manifest().video_id];
      const TruthLookup lookup = [&](std::int64_t f) -> const FrameAnnotation* {
        auto it = frames_truth.find(f);
        return it == frames_truth.end() ? nullptr : &it->second;
      };
      const RunSummary s = pipeline->process_stream(
          stream,
          [&](const PipelineResult& r) {
            results += result_to_json_line(r, cfg.result_latency);
            results += '\n';
            if (!(r.failed && r.stage_latencies.empty())) timings.push_back(r);
          },
          lookup);
      total.frames += s.frames;
      total.blurry += s.blurry;
      total.failed += s.failed;
      total.decode_errors += s.decode_errors;
      video_list.push_back({{"video_id", stream.manifest().video_id},
                            {"directory", dir.string()},
                            {"frame_count", stream.manifest().frame_count},
                            {"fps", stream.manifest().fps}});
    }
  } catch (const std::exception& e) {
    fmt::print(err, "stream error: {}\n", e.what());
    return kExitStream;
  }
  total.latency = make_latency_report(timings);

  ordered_json manifest;
  manifest["tool"] = "scopeline";
  manifest["tool_version"] = kToolVersion;
  manifest["config"] = pipeline_config_to_json(cfg);
  manifest["input"] = {{"path", input.string()}, {"videos", video_list}};
  manifest["output_dir"] = opts.output.string();
  manifest["seeds"] = {{"detector_a", cfg.detector_a.synthetic.seed},
                       {"detector_b", cfg.detector_b.synthetic.seed}};
  manifest["summary"] = {{"frames", total.frames},
                         {"blurry", total.blurry},
                         {"failed", total.failed},
                         {"decode_errors", total.decode_errors}};

  ordered_json latency = latency_report_to_json(total.latency);
  try {
    fs::create_directories(opts.output);
    write_file_atomic(opts.output / "results.jsonl", results);
    write_file_atomic(opts.output / "manifest.json", manifest.dump(2) + "\n");
    write_file_atomic(opts.output / "latency_report.json", latency.dump(2) + "\n");
  } catch (const std::exception& e) {
    fmt::print(err, "stream error: {}\n", e.what());
    return kExitStream;
  }
  fmt::print(out, "processed {} frames ({} blurry, {} failed, {} decode errors) -> {}\n", total.frames,
             total.blurry, total.failed, total.decode_errors, opts.output.string());
  return kExitOk;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  init_logging();
  MatchConfig match;
  std::optional<ConfusionCounts> injected;
  try {
    if (opts.match == "iou") {
      match.criterion = MatchCriterion::iou;
    } else if (opts.match == "centroid") {
      match.criterion = MatchCriterion::centroid;
    } else {
      throw ConfigError(fmt::format("--match '{}' (expected iou | centroid)", opts.match));
    }
    match.iou_match_threshold = opts.iou_threshold;
    match.validate();
    if (!(opts.fps > 0.0)) throw ConfigError("--fps must be > 0");
    if (opts.merge_window < 0) throw ConfigError("--merge-window must be >= 0");
    if (opts.output.empty()) throw ConfigError("--output is required");
    if (opts.counts) {
      const auto v = parse_number_list(*opts.counts, 3, "--counts");
      for (double x : v) {
        if (x < 0 || x != std::floor(x)) throw ConfigError("--counts must be non-negative integers");
      }
      injected = ConfusionCounts{static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1]),
                                 static_cast<std::int64_t>(v[2])};
    } else if (!opts.results || !opts.annotations) {
      throw ConfigError("--results and --annotations are required unless --counts is given");
    }
  } catch (const std::exception& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }

  EvaluationReport rep;
  try {
    if (injected) {
      rep = report_from_counts(*injected, opts.model);
      rep.match = match;
      rep.fps = opts.fps;
    } else {
      const auto results = read_results(*opts.results);
      const auto truth = read_annotations(*opts.annotations);
      rep = evaluate(results, truth, match, opts.fps, opts.merge_window, opts.model);
    }
    write_reports(opts.output, rep);
  } catch (const std::exception& e) {
    fmt::print(err, "stream error: {}\n", e.what());
    return kExitStream;
  }

  auto pct = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "null"; };
  fmt::print(out, "{}: TP={} FP={} FN={} precision={} recall={} F1={} F2={}\n", rep.model,
             rep.counts.tp, rep.counts.fp, rep.counts.fn, pct(rep.scores.precision),
             pct(rep.scores.recall), pct(rep.scores.f1), pct(rep.scores.f2));
  return kExitOk;
}

double BenchScenario::mean_total_ms() const {
  auto it = latency.stages.find(stage::total_wall);
  return it == latency.stages.end() ? 0.0 : it->second.mean;
}

const BenchScenario* BenchReport::find(const std::string& name) const {
  for (const auto& s : scenarios) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

namespace {

BenchScenario run_bench_scenario(const std::string& name, PipelineConfig cfg, int frames, int width,
                                 int height, bool blurry, const BoundingBox& polyp) {
  auto gate = std::make_unique<HeuristicBlurGate>(cfg.gate.threshold, cfg.gate.simulated_latency_ms);
  auto a = std::make_unique<SyntheticDetector>(cfg.detector_a.synthetic, Source::detector_a, "bench-A");
  auto b = std::make_unique<SyntheticDetector>(cfg.detector_b.synthetic, Source::detector_b, "bench-B");
  DetectorBackend* b_ptr = b.get();
  Pipeline pipeline(cfg, std::move(gate), std::move(a), std::move(b));

  std::vector<PipelineResult> results;
  for (int f = 0; f < frames; ++f) {
    Raster r = blurry ? flat_raster(width, height, 128, 128, 128)
                      : textured_raster(width, height, static_cast<std::uint64_t>(f) + 1);
    const FrameAnnotation truth{"bench", f, {{polyp, Label::polyp}}};
    results.push_back(pipeline.process_frame(make_frame(f, kDefaultFps, std::move(r)), &truth));
  }
  return {name, make_latency_report(results), b_ptr->invocations()};
}

}  // namespace

int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err, BenchReport* report) {
  init_logging();
  PipelineConfig base;
  std::vector<double> profile;
  try {
    if (opts.config) base = load_config(*opts.config).config;
    profile = parse_number_list(opts.latency_profile, 3, "--latency-profile");
    for (double p : profile) {
      if (p < 0) throw ConfigError("latency profile values must be >= 0");
    }
    if (opts.frames <= 0) throw ConfigError("--frames must be > 0");
    if (opts.width < 3 || opts.height < 3) throw ConfigError("bench frames must be at least 3x3");
  } catch (const std::exception& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }

  base.gate.kind = GateKind::heuristic;
  base.gate.simulated_latency_ms = profile[0];
  for (auto* d : {&base.detector_a, &base.detector_b}) {
    d->kind = DetectorSpec::Kind::synthetic;
    d->synthetic.p_tp = 1.0;
    d->synthetic.fp_rate = 0.0;
    d->synthetic.jitter_px = 0.0;
  }
  base.detector_a.synthetic.simulated_latency_ms = profile[1];
  base.detector_b.synthetic.simulated_latency_ms = profile[2];

  const int short_edge = std::min(opts.width, opts.height);
  const int large_side = std::max(1, short_edge / 2);
  const BoundingBox large{1, 1, large_side, large_side};
  // Strictly below the default 0.1 short-edge ratio.
  const int small_side = std::max(1, static_cast<int>(std::ceil(0.1 * short_edge)) - 1);
  const BoundingBox small{1, 1, small_side, small_side};

  BenchReport local;
  BenchReport& rep = report ? *report : local;
  rep.scenarios.clear();

  PipelineConfig seq = base;
  seq.mode = ExecutionMode::sequential;
  seq.ensemble.mode = EnsembleMode::and_rule;
  PipelineConfig par = seq;
  par.mode = ExecutionMode::parallel;
  PipelineConfig sa = seq;
  sa.ensemble.mode = EnsembleMode::size_aware;

  rep.scenarios.push_back(run_bench_scenario("sequential/clear", seq, opts.frames, opts.width,
                                             opts.height, false, large));
  rep.scenarios.push_back(run_bench_scenario("parallel/clear", par, opts.frames, opts.width,
                                             opts.height, false, large));
  rep.scenarios.push_back(run_bench_scenario("sequential/blurry", seq, opts.frames, opts.width,
                                             opts.height, true, large));
  rep.scenarios.push_back(run_bench_scenario("size_aware/small", sa, opts.frames, opts.width,
                                             opts.height, false, small));

  fmt::print(out, "simulated stage costs: gate {} ms, detector A {} ms, detector B {} ms; {} frames of {}x{}\n",
             profile[0], profile[1], profile[2], opts.frames, opts.width, opts.height);
  fmt::print(out, "{:<20} {:>9} {:>9} {:>9} {:>9} {:>11} {:>9} {:>8}\n", "scenario", "gate", "det_a",
             "det_b", "ensemble", "total_mean", "total_p95", "fps");
  for (const auto& s : rep.scenarios) {
    auto col = [&](const char* stage_name) {
      auto it = s.latency.stages.find(stage_name);
      return it == s.latency.stages.end() ? std::string("-") : fmt::format("{:.3f}", it->second.mean);
    };
    const auto& total_stats = s.latency.stages.at(stage::total_wall);
    fmt::print(out, "{:<20} {:>9} {:>9} {:>9} {:>9} {:>11.3f} {:>9.3f} {:>8.2f}\n", s.name,
               col(stage::gate), col(stage::detector_a), col(stage::detector_b), col(stage::ensemble),
               total_stats.mean, total_stats.p95, s.latency.throughput_fps);
  }
  return kExitOk;
}

int cmd_gen_synthetic(const GenOptions& opts, std::ostream& out, std::ostream& err) {
  init_logging();
  std::vector<GeneratedVideo> videos;
  try {
    if (opts.output.empty()) throw ConfigError("--output is required");
    videos = generate_dataset(opts.spec);
  } catch (const std::exception& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }
  try {
    write_dataset(opts.output, videos);
  } catch (const std::exception& e) {
    fmt::print(err, "stream error: {}\n", e.what());
    return kExitStream;
  }
  std::size_t blurry = 0;
  for (const auto& v : videos) blurry += static_cast<std::size_t>(std::count(v.blurry.begin(), v.blurry.end(), true));
  fmt::print(out, "wrote {} videos ({} blurry frames) to {}\n", videos.size(), blurry, opts.output.string());
  return kExitOk;
}

}  // namespace scopeline::cli
