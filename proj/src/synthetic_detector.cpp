#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "scopeline/backends.hpp"
#include "scopeline/splitmix.hpp"

namespace scopeline {

namespace {

void check_range(const ScoreRange& r, const char* name) {
  if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi)) {
    throw ConfigError(fmt::format("{} [{}, {}] must satisfy 0 <= lo <= hi <= 1", name, r.lo, r.hi));
  }
}

double draw_score(SplitMix64& rng, const ScoreRange& r) {
  return r.lo + rng.uniform() * (r.hi - r.lo);
}

}  // namespace

void SyntheticDetectorConfig::validate() const {
  if (!(p_tp >= 0.0 && p_tp <= 1.0)) throw ConfigError(fmt::format("p_tp {} outside [0, 1]", p_tp));
  if (!(fp_rate >= 0.0) || !std::isfinite(fp_rate)) {
    throw ConfigError(fmt::format("fp_rate {} must be a finite value >= 0", fp_rate));
  }
  if (!(jitter_px >= 0.0) || !std::isfinite(jitter_px)) {
    throw ConfigError(fmt::format("jitter_px {} must be a finite value >= 0", jitter_px));
  }
  if (!(simulated_latency_ms >= 0.0)) {
    throw ConfigError(fmt::format("simulated_latency_ms {} must be >= 0", simulated_latency_ms));
  }
  check_range(tp_score_range, "tp_score_range");
  check_range(fp_score_range, "fp_score_range");
}

std::vector<ScoredBox> synthetic_detect(const SyntheticDetectorConfig& config,
                                        std::int64_t frame_index, const FrameAnnotation& truth,
                                        int image_w, int image_h, Source source) {
  config.validate();
  if (image_w <= 0 || image_h <= 0) {
    throw ConfigError(fmt::format("image extent {}x{} is empty", image_w, image_h));
  }
  SplitMix64 rng(config.seed ^ (static_cast<std::uint64_t>(frame_index) * kFrameSeedStride));
  std::vector<ScoredBox> out;

  for (const AnnotatedBox& gt : truth.boxes) {
    if (gt.label != Label::polyp) continue;
    const bool accept = rng.uniform() < config.p_tp;
    double jitter[4];
    for (double& j : jitter) j = std::round(config.jitter_px * rng.gaussian());
    const double score = draw_score(rng, config.tp_score_range);
    if (!accept) continue;

    const int x0 = std::clamp(gt.box.x + static_cast<int>(jitter[0]), 0, image_w - 1);
    const int y0 = std::clamp(gt.box.y + static_cast<int>(jitter[1]), 0, image_h - 1);
    const int x1 = std::clamp(gt.box.right() + static_cast<int>(jitter[2]), x0 + 1, image_w);
    const int y1 = std::clamp(gt.box.bottom() + static_cast<int>(jitter[3]), y0 + 1, image_h);
    out.push_back({{x0, y0, x1 - x0, y1 - y0}, score, source, Label::polyp});
  }

  const std::int64_t fp_count = rng.poisson(config.fp_rate);
  const int short_edge = std::min(image_w, image_h);
  const double min_side = std::min<double>(kMinFalseBoxSide, short_edge);
  const double max_side = std::max<double>(min_side, short_edge / 2.0);
  const double log_lo = std::log(min_side);
  const double log_hi = std::log(max_side);
  for (std::int64_t i = 0; i < fp_count; ++i) {
    const int w = std::clamp(static_cast<int>(std::lround(std::exp(log_lo + rng.uniform() * (log_hi - log_lo)))), 1, image_w);
    const int h = std::clamp(static_cast<int>(std::lround(std::exp(log_lo + rng.uniform() * (log_hi - log_lo)))), 1, image_h);
    const int x = static_cast<int>(rng.uniform_int(0, image_w - w));
    const int y = static_cast<int>(rng.uniform_int(0, image_h - h));
    const double score = draw_score(rng, config.fp_score_range);
    out.push_back({{x, y, w, h}, score, source, Label::polyp});
  }
  return out;
}

SyntheticDetector::SyntheticDetector(SyntheticDetectorConfig config, Source source, std::string name)
    : config_(config), source_(source), name_(std::move(name)) {
  config_.validate();
}

std::vector<ScoredBox> SyntheticDetector::detect(const Frame& frame, const FrameAnnotation* truth) {
  count_invocation();
  static const FrameAnnotation kNoTruth;
  return synthetic_detect(config_, frame.frame_index, truth ? *truth : kNoTruth, frame.width,
                          frame.height, source_);
}

}  // namespace scopeline
