#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scopeline/annotation.hpp"
#include "scopeline/backends.hpp"
#include "scopeline/ensemble.hpp"
#include "scopeline/external.hpp"
#include "scopeline/media.hpp"

#include <json.hpp>

namespace scopeline {

enum class ExecutionMode { sequential, parallel };
std::string_view to_string(ExecutionMode m);
ExecutionMode execution_mode_from_string(std::string_view s);

enum class GateKind { heuristic, external, disabled };

struct GateSpec {
  GateKind kind = GateKind::heuristic;
  double threshold = kDefaultBlurThreshold;
  double simulated_latency_ms = 0.0;
  ExternalEndpoint endpoint;  // external only
};

struct DetectorSpec {
  enum class Kind { synthetic, external };
  Kind kind = Kind::synthetic;
  SyntheticDetectorConfig synthetic;
  ExternalEndpoint endpoint;  // external only
  double simulated_latency_ms = 0.0;  // external only; synthetic carries its own
};

// What the results file records under "stage_latencies".
enum class ResultLatency { simulated, accounted };

struct PipelineConfig {
  GateSpec gate;
  DetectorSpec detector_a;
  DetectorSpec detector_b;
  EnsembleConfig ensemble;
  ExecutionMode mode = ExecutionMode::sequential;
  double fps = 0.0;  // 0: use the stream manifest
  ResultLatency result_latency = ResultLatency::simulated;

  void validate() const;
};

// JSON mirror of PipelineConfig. Unknown keys are rejected; missing keys keep
// their defaults. Throws ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& cfg);

namespace stage {
inline constexpr const char* gate = "gate";
inline constexpr const char* detector_a = "detector_a";
inline constexpr const char* detector_b = "detector_b";
inline constexpr const char* ensemble = "ensemble";
inline constexpr const char* total_wall = "total_wall";
}  // namespace stage

struct StageTiming {
  double measured_ms = 0.0;
  double simulated_ms = 0.0;
  double accounted() const { return measured_ms + simulated_ms; }
};

struct PipelineResult {
  std::string video_id;
  std::int64_t frame_index = 0;
  bool blurry = false;
  bool failed = false;
  std::string error;
  std::vector<ScoredBox> detections;
  // Present stages only; blurry frames carry gate and total_wall.
  std::map<std::string, StageTiming> stage_latencies;

  std::optional<double> accounted_ms(const std::string& name) const;
};

std::string result_to_json_line(const PipelineResult& r, ResultLatency latency);
PipelineResult result_from_json_line(const std::string& line);

struct StageStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct LatencyReport {
  std::map<std::string, StageStats> stages;  // accounted milliseconds
  double throughput_fps = 0.0;
};

// Nearest-rank percentiles over accounted stage latencies.
LatencyReport make_latency_report(const std::vector<PipelineResult>& results);
nlohmann::ordered_json latency_report_to_json(const LatencyReport& r);

struct RunSummary {
  std::int64_t frames = 0;
  std::int64_t blurry = 0;
  std::int64_t failed = 0;
  std::int64_t decode_errors = 0;
  LatencyReport latency;
};

using ResultSink = std::function<void(const PipelineResult&)>;
// frame_index -> ground truth, handed to simulation backends.
using TruthLookup = std::function<const FrameAnnotation*(std::int64_t frame_index)>;

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::unique_ptr<BlurGate> gate,
           std::unique_ptr<DetectorBackend> detector_a, std::unique_ptr<DetectorBackend> detector_b);

  // Builds gate and detectors from their specs.
  static Pipeline from_config(const PipelineConfig& config);

  PipelineResult process_frame(const Frame& frame, const FrameAnnotation* truth = nullptr);

  // Delivers results to `sink` in frame order, one call per stream slot
  // (decode failures become failed results).
  RunSummary process_stream(FrameStream& stream, const ResultSink& sink,
                            const TruthLookup& truth = {});

  const PipelineConfig& config() const { return config_; }
  DetectorBackend& detector_a() { return *detector_a_; }
  DetectorBackend& detector_b() { return *detector_b_; }
  BlurGate* gate() { return gate_.get(); }

 private:
  PipelineConfig config_;
  std::unique_ptr<BlurGate> gate_;
  std::unique_ptr<DetectorBackend> detector_a_;
  std::unique_ptr<DetectorBackend> detector_b_;
};

}  // namespace scopeline
