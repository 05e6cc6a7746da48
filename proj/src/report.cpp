#include "scopeline/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>

#include "scopeline/io.hpp"

namespace scopeline {

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

}  // namespace

EvaluationReport evaluate(const std::vector<PipelineResult>& results, const AnnotationIndex& truth,
                          const MatchConfig& cfg, double fps, std::int64_t merge_window_frames,
                          const std::string& model) {
  cfg.validate();
  EvaluationReport rep;
  rep.model = model;
  rep.match = cfg;
  rep.fps = fps;

  std::map<std::string, FrameDetections> by_video;
  for (const auto& r : results) {
    auto& slot = by_video[r.video_id][r.frame_index];
    slot.insert(slot.end(), r.detections.begin(), r.detections.end());
  }
  std::set<std::string> videos;
  for (const auto& [v, _] : by_video) videos.insert(v);
  for (const auto& [v, _] : truth) videos.insert(v);

  static const std::map<std::int64_t, FrameAnnotation> kNoFrames;
  static const std::vector<ScoredBox> kNoBoxes;

  for (const std::string& video : videos) {
    const auto ti = truth.find(video);
    const auto& frames_truth = ti == truth.end() ? kNoFrames : ti->second;
    const auto ri = by_video.find(video);
    const FrameDetections empty;
    const FrameDetections& frames_pred = ri == by_video.end() ? empty : ri->second;

    std::set<std::int64_t> frame_ids;
    for (const auto& [f, _] : frames_truth) frame_ids.insert(f);
    for (const auto& [f, _] : frames_pred) frame_ids.insert(f);

    bool has_polyp = false;
    std::vector<std::int64_t> fp_frames;
    for (std::int64_t f : frame_ids) {
      const auto pi = frames_pred.find(f);
      const auto& preds = pi == frames_pred.end() ? kNoBoxes : pi->second;
      const auto ai = frames_truth.find(f);
      FrameAnnotation none{video, f, {}};
      const FrameAnnotation& ann = ai == frames_truth.end() ? none : ai->second;
      if (ann.polyp_count() > 0) has_polyp = true;
      const ConfusionCounts c = match_frame(preds, ann, cfg);
      rep.counts += c;
      if (c.fp > 0) fp_frames.push_back(f);
    }

    if (has_polyp) {
      rep.clips.push_back(time_to_first_detection(video, frames_truth, frames_pred, cfg, fps));
    } else if (!frames_pred.empty()) {
      FpClip clip;
      clip.clip_id = video;
      clip.incidents = fp_incidents(fp_frames, merge_window_frames);
      clip.duration_frames = static_cast<std::int64_t>(frames_pred.size());
      clip.per_minute = fp_per_minute(clip.incidents, clip.duration_frames, fps);
      rep.fp_clips.push_back(clip);
    }
  }

  rep.scores = prf(rep.counts);
  std::vector<double> rates;
  for (const auto& c : rep.fp_clips) rates.push_back(c.per_minute);
  rep.fp_cdf = ecdf(rates);
  const int steps = static_cast<int>(std::lround(kRecallCurveMaxSeconds / kRecallCurveStepSeconds));
  for (int i = 0; i <= steps; ++i) {
    const double t = i * kRecallCurveStepSeconds;
    rep.recall_curve.emplace_back(t, recall_at(rep.clips, t));
  }
  return rep;
}

EvaluationReport report_from_counts(const ConfusionCounts& counts, const std::string& model) {
  EvaluationReport rep;
  rep.model = model;
  rep.counts = counts;
  rep.scores = prf(counts);
  return rep;
}

std::vector<PipelineResult> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results " + path.string());
  std::vector<PipelineResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(result_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::ordered_json metrics_json(const EvaluationReport& r) {
  nlohmann::ordered_json m;
  m["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  m["precision"] = opt(r.scores.precision);
  m["recall"] = opt(r.scores.recall);
  m["f1"] = opt(r.scores.f1);
  m["f2"] = opt(r.scores.f2);

  std::int64_t detected = 0;
  for (const auto& c : r.clips) detected += c.detection_frame ? 1 : 0;
  m["clips"] = {{"total", r.clips.size()}, {"detected", detected}};

  std::optional<double> mean_rate;
  if (!r.fp_clips.empty()) {
    double sum = 0.0;
    for (const auto& c : r.fp_clips) sum += c.per_minute;
    mean_rate = sum / static_cast<double>(r.fp_clips.size());
  }
  m["fp_clips"] = {{"count", r.fp_clips.size()}, {"mean_fp_per_minute", opt(mean_rate)}};

  nlohmann::ordered_json out;
  out["match"] = {{"criterion", r.match.criterion == MatchCriterion::iou ? "iou" : "centroid"},
                  {"iou_match_threshold", r.match.iou_match_threshold},
                  {"include_instruments", r.match.include_instruments}};
  out["fps"] = r.fps;
  out["models"][r.model] = m;
  return out;
}

std::string clips_csv(const EvaluationReport& r) {
  std::string s = "clip_id,delay_seconds\n";
  for (const auto& c : r.clips) s += fmt::format("{},{}\n", c.clip_id, csv_number(c.delay_seconds()));
  return s;
}

std::string recall_curve_csv(const EvaluationReport& r) {
  std::string s = "t,recall\n";
  for (const auto& [t, rec] : r.recall_curve) s += fmt::format("{},{}\n", t, csv_number(rec));
  return s;
}

std::string fp_cdf_csv(const EvaluationReport& r) {
  std::string s = "rate,fraction\n";
  for (const auto& p : r.fp_cdf) s += fmt::format("{},{}\n", p.value, p.fraction);
  return s;
}

void write_reports(const std::filesystem::path& out_dir, const EvaluationReport& r) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "metrics.json", metrics_json(r).dump(2) + "\n");
  write_file_atomic(out_dir / "clips.csv", clips_csv(r));
  write_file_atomic(out_dir / "recall_curve.csv", recall_curve_csv(r));
  write_file_atomic(out_dir / "fp_cdf.csv", fp_cdf_csv(r));
}

}  // namespace scopeline
