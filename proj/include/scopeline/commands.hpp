#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scopeline/dataset.hpp"
#include "scopeline/eval.hpp"
#include "scopeline/pipeline.hpp"

namespace scopeline::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitStream = 3 };

// Reads SCOPELINE_LOG (trace|debug|info|warn|error|off) and routes logs to stderr.
void init_logging();

struct RunOptions {
  std::optional<std::filesystem::path> config;  // pipeline config or a run manifest
  std::optional<std::filesystem::path> input;
  std::filesystem::path output;
  std::optional<std::string> mode;
  std::optional<std::string> ensemble;
  std::optional<double> short_edge_threshold;
  std::optional<double> iou_threshold;
  std::optional<std::uint64_t> seed;  // detector A gets seed, detector B seed + 1
  std::optional<double> fps;
};

struct EvalOptions {
  std::optional<std::filesystem::path> results;
  std::optional<std::filesystem::path> annotations;
  std::filesystem::path output;
  std::string match = "iou";
  double iou_threshold = 0.5;
  double fps = kDefaultFps;
  std::int64_t merge_window = kDefaultMergeWindowFrames;
  std::string model = "system";
  // "tp,fp,fn": skip matching and report these counts.
  std::optional<std::string> counts;
};

struct BenchOptions {
  std::optional<std::filesystem::path> config;
  int frames = 200;
  std::string latency_profile = "3,20,20";  // gate, detector A, detector B (ms)
  int width = 96;
  int height = 72;
};

struct BenchScenario {
  std::string name;
  LatencyReport latency;
  std::uint64_t detector_b_invocations = 0;

  double mean_total_ms() const;
};

struct BenchReport {
  std::vector<BenchScenario> scenarios;
  const BenchScenario* find(const std::string& name) const;
};

struct GenOptions {
  std::filesystem::path output;
  SyntheticDatasetSpec spec;
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err,
              BenchReport* report = nullptr);
int cmd_gen_synthetic(const GenOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace scopeline::cli
