#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scopeline/annotation.hpp"
#include "scopeline/geometry.hpp"

namespace scopeline {

enum class MatchCriterion { iou, centroid };

struct MatchConfig {
  MatchCriterion criterion = MatchCriterion::iou;
  double iou_match_threshold = 0.5;
  // Instrument boxes are ignored on both sides unless set.
  bool include_instruments = false;

  void validate() const;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MatchPair {
  std::size_t prediction;  // index into the predictions argument
  std::size_t truth;       // index into truth.boxes
};

struct FrameMatch {
  ConfusionCounts counts;
  std::vector<MatchPair> pairs;
};

// Greedy matching: predictions by descending score (input order on ties),
// each taking the unmatched eligible truth box with the highest IoU. Under
// the iou criterion a truth box is eligible when IoU >= threshold; under the
// centroid criterion when it contains the prediction's centre.
FrameMatch match_frame_detail(std::span<const ScoredBox> predictions, const FrameAnnotation& truth,
                              const MatchConfig& cfg);
ConfusionCounts match_frame(std::span<const ScoredBox> predictions, const FrameAnnotation& truth,
                            const MatchConfig& cfg);

// Percentages; nullopt where the ratio is undefined.
struct PrfScores {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> f2;
};

// F-beta is defined whenever precision and recall are; it is 0 when both are 0.
std::optional<double> f_beta(std::optional<double> precision, std::optional<double> recall, double beta);
PrfScores prf(const ConfusionCounts& counts);

struct ClipRecord {
  std::string clip_id;
  std::int64_t first_appearance_frame = 0;
  std::optional<std::int64_t> detection_frame;
  double fps = 60.0;

  std::optional<double> delay_seconds() const;
};

// per-frame detections of one clip, keyed by frame_index
using FrameDetections = std::map<std::int64_t, std::vector<ScoredBox>>;

// Throws std::invalid_argument when the clip has no polyp annotation.
ClipRecord time_to_first_detection(const std::string& clip_id,
                                   const std::map<std::int64_t, FrameAnnotation>& clip,
                                   const FrameDetections& results, const MatchConfig& cfg, double fps);

// Fraction of clips detected within horizon_seconds; nullopt for no clips.
std::optional<double> recall_at(std::span<const ClipRecord> records, double horizon_seconds);

inline constexpr std::int64_t kDefaultMergeWindowFrames = 6;

// Number of false-positive incidents: a frame opens a new incident when it is
// more than merge_window_frames after the previous FP frame. Throws
// std::invalid_argument for decreasing input or a negative window.
std::int64_t fp_incidents(std::span<const std::int64_t> fp_frames,
                          std::int64_t merge_window_frames = kDefaultMergeWindowFrames);

// Throws std::invalid_argument unless duration_frames > 0 and fps > 0.
double fp_per_minute(std::int64_t incidents, std::int64_t duration_frames, double fps);

struct EcdfPoint {
  double value;
  double fraction;
  friend bool operator==(const EcdfPoint&, const EcdfPoint&) = default;
};

// Right-continuous step function: one point per distinct value, fraction of
// samples <= value. Empty input gives an empty result.
std::vector<EcdfPoint> ecdf(std::span<const double> values);

}  // namespace scopeline
