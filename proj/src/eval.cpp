#include "scopeline/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "scopeline/backends.hpp"

namespace scopeline {

void MatchConfig::validate() const {
  if (!(iou_match_threshold > 0.0 && iou_match_threshold <= 1.0)) {
    throw ConfigError(fmt::format("iou_match_threshold {} outside (0, 1]", iou_match_threshold));
  }
}

namespace {

bool counts_as_truth(Label l, const MatchConfig& cfg) {
  return l == Label::polyp || cfg.include_instruments;
}

bool contains_centre(const BoundingBox& outer, const BoundingBox& inner) {
  // Compare doubled coordinates to stay in integers.
  const std::int64_t cx2 = 2 * std::int64_t{inner.x} + inner.w;
  const std::int64_t cy2 = 2 * std::int64_t{inner.y} + inner.h;
  return cx2 >= 2 * std::int64_t{outer.x} && cx2 < 2 * std::int64_t{outer.right()} &&
         cy2 >= 2 * std::int64_t{outer.y} && cy2 < 2 * std::int64_t{outer.bottom()};
}

}  // namespace

FrameMatch match_frame_detail(std::span<const ScoredBox> predictions, const FrameAnnotation& truth,
                              const MatchConfig& cfg) {
  FrameMatch m;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (counts_as_truth(predictions[i].label, cfg)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return predictions[i].score > predictions[j].score;
  });

  std::vector<std::size_t> gt;
  for (std::size_t g = 0; g < truth.boxes.size(); ++g) {
    if (counts_as_truth(truth.boxes[g].label, cfg)) gt.push_back(g);
  }
  std::vector<bool> taken(truth.boxes.size(), false);

  for (std::size_t p : order) {
    const BoundingBox& pb = predictions[p].box;
    std::optional<std::size_t> best;
    AreaRatio best_iou{0, 1};
    for (std::size_t g : gt) {
      if (taken[g]) continue;
      const BoundingBox& gb = truth.boxes[g].box;
      const AreaRatio r = iou_exact(pb, gb);
      const bool eligible = cfg.criterion == MatchCriterion::iou ? r.at_least(cfg.iou_match_threshold)
                                                                 : contains_centre(gb, pb);
      if (!eligible) continue;
      // Strictly greater keeps the lowest truth index on ties.
      if (!best || r.intersection * best_iou.union_area > best_iou.intersection * r.union_area) {
        best = g;
        best_iou = r;
      }
    }
    if (best) {
      taken[*best] = true;
      m.pairs.push_back({p, *best});
      ++m.counts.tp;
    } else {
      ++m.counts.fp;
    }
  }
  m.counts.fn = static_cast<std::int64_t>(gt.size()) - m.counts.tp;
  return m;
}

ConfusionCounts match_frame(std::span<const ScoredBox> predictions, const FrameAnnotation& truth,
                            const MatchConfig& cfg) {
  return match_frame_detail(predictions, truth, cfg).counts;
}

std::optional<double> f_beta(std::optional<double> precision, std::optional<double> recall, double beta) {
  if (!precision || !recall) return std::nullopt;
  const double b2 = beta * beta;
  const double denom = b2 * *precision + *recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * *precision * *recall / denom;
}

PrfScores prf(const ConfusionCounts& c) {
  PrfScores s;
  if (c.tp + c.fp > 0) s.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  s.f1 = f_beta(s.precision, s.recall, 1.0);
  s.f2 = f_beta(s.precision, s.recall, 2.0);
  return s;
}

std::optional<double> ClipRecord::delay_seconds() const {
  if (!detection_frame) return std::nullopt;
  return static_cast<double>(*detection_frame - first_appearance_frame) / fps;
}

ClipRecord time_to_first_detection(const std::string& clip_id,
                                   const std::map<std::int64_t, FrameAnnotation>& clip,
                                   const FrameDetections& results, const MatchConfig& cfg, double fps) {
  ClipRecord rec;
  rec.clip_id = clip_id;
  rec.fps = fps;
  auto first = std::find_if(clip.begin(), clip.end(),
                            [](const auto& kv) { return kv.second.polyp_count() > 0; });
  if (first == clip.end()) {
    throw std::invalid_argument(fmt::format("clip '{}' has no polyp annotation", clip_id));
  }
  rec.first_appearance_frame = first->first;
  for (auto it = results.lower_bound(rec.first_appearance_frame); it != results.end(); ++it) {
    auto ann = clip.find(it->first);
    if (ann == clip.end()) continue;
    if (match_frame(it->second, ann->second, cfg).tp >= 1) {
      rec.detection_frame = it->first;
      break;
    }
  }
  return rec;
}

std::optional<double> recall_at(std::span<const ClipRecord> records, double horizon_seconds) {
  if (records.empty()) return std::nullopt;
  const auto hits = std::count_if(records.begin(), records.end(), [&](const ClipRecord& r) {
    const auto d = r.delay_seconds();
    return d && *d <= horizon_seconds;
  });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::int64_t fp_incidents(std::span<const std::int64_t> fp_frames, std::int64_t merge_window_frames) {
  if (merge_window_frames < 0) throw std::invalid_argument("merge window must be >= 0");
  std::int64_t incidents = 0;
  for (std::size_t i = 0; i < fp_frames.size(); ++i) {
    if (i > 0 && fp_frames[i] < fp_frames[i - 1]) {
      throw std::invalid_argument(fmt::format("fp frames not sorted at position {} ({} after {})", i,
                                              fp_frames[i], fp_frames[i - 1]));
    }
    if (i == 0 || fp_frames[i] - fp_frames[i - 1] > merge_window_frames) ++incidents;
  }
  return incidents;
}

double fp_per_minute(std::int64_t incidents, std::int64_t duration_frames, double fps) {
  if (duration_frames <= 0) throw std::invalid_argument("fp_per_minute: duration must be > 0 frames");
  if (!(fps > 0.0)) throw std::invalid_argument("fp_per_minute: fps must be > 0");
  const double minutes = static_cast<double>(duration_frames) / fps / 60.0;
  return static_cast<double>(incidents) / minutes;
}

std::vector<EcdfPoint> ecdf(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

}  // namespace scopeline
