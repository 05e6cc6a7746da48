#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopeline/annotation.hpp"
#include "scopeline/eval.hpp"
#include "scopeline/pipeline.hpp"

namespace scopeline {

struct FpClip {
  std::string clip_id;
  std::int64_t incidents = 0;
  std::int64_t duration_frames = 0;
  double per_minute = 0.0;
};

struct EvaluationReport {
  std::string model = "system";
  MatchConfig match;
  double fps = 60.0;
  ConfusionCounts counts;
  PrfScores scores;
  std::vector<ClipRecord> clips;   // videos containing polyps
  std::vector<FpClip> fp_clips;    // videos without polyps
  std::vector<EcdfPoint> fp_cdf;
  std::vector<std::pair<double, std::optional<double>>> recall_curve;
};

inline constexpr double kRecallCurveMaxSeconds = 30.0;
inline constexpr double kRecallCurveStepSeconds = 0.5;

// Evaluates every (video, frame) present in either the results or the
// annotations; a frame with no result counts as having no detections. Videos
// are processed in video_id order.
EvaluationReport evaluate(const std::vector<PipelineResult>& results, const AnnotationIndex& truth,
                          const MatchConfig& cfg, double fps, std::int64_t merge_window_frames,
                          const std::string& model = "system");

// metrics.json for a report built from externally supplied counts only.
EvaluationReport report_from_counts(const ConfusionCounts& counts, const std::string& model);

std::vector<PipelineResult> read_results(const std::filesystem::path& path);

nlohmann::ordered_json metrics_json(const EvaluationReport& r);
std::string clips_csv(const EvaluationReport& r);
std::string recall_curve_csv(const EvaluationReport& r);
std::string fp_cdf_csv(const EvaluationReport& r);

// Writes metrics.json, clips.csv, recall_curve.csv and fp_cdf.csv atomically.
void write_reports(const std::filesystem::path& out_dir, const EvaluationReport& r);

}  // namespace scopeline
