#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scopeline/annotation.hpp"
#include "scopeline/geometry.hpp"
#include "scopeline/media.hpp"

namespace scopeline {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendDescriptor {
  std::string name;
  // Cost charged to the pipeline clock per invocation, on top of measured time.
  double simulated_latency_ms = 0.0;
};

// A polyp detector. detect() must be deterministic for a fixed backend state
// and frame. `truth` is only consulted by simulation backends and may be null.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<ScoredBox> detect(const Frame& frame, const FrameAnnotation* truth) = 0;
  virtual BackendDescriptor descriptor() const = 0;

  std::uint64_t invocations() const { return invocations_.load(); }

 protected:
  void count_invocation() { invocations_.fetch_add(1); }

 private:
  std::atomic<std::uint64_t> invocations_{0};
};

class BlurGate {
 public:
  virtual ~BlurGate() = default;
  virtual BlurVerdict classify(const Frame& frame) = 0;
  virtual BackendDescriptor descriptor() const = 0;
};

class HeuristicBlurGate final : public BlurGate {
 public:
  explicit HeuristicBlurGate(double threshold = kDefaultBlurThreshold,
                             double simulated_latency_ms = 0.0)
      : threshold_(threshold), simulated_latency_ms_(simulated_latency_ms) {}

  BlurVerdict classify(const Frame& frame) override { return heuristic_blur_gate(frame, threshold_); }
  BackendDescriptor descriptor() const override {
    return {"heuristic-laplacian", simulated_latency_ms_};
  }

 private:
  double threshold_;
  double simulated_latency_ms_;
};

// Score ranges are placeholders: no detector calibration is known.
struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct SyntheticDetectorConfig {
  std::uint64_t seed = 0;
  double p_tp = 1.0;
  double fp_rate = 0.0;
  double jitter_px = 0.0;
  ScoreRange tp_score_range{0.5, 1.0};
  ScoreRange fp_score_range{0.1, 0.6};
  double simulated_latency_ms = 0.0;

  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

inline constexpr std::uint64_t kFrameSeedStride = 0x9E3779B97F4A7C15ULL;
inline constexpr int kMinFalseBoxSide = 8;

// Simulated detector output for one frame. The PRNG is SplitMix64 seeded with
// seed ^ (frame_index * 0x9E3779B97F4A7C15), and draws are taken in this order:
//   for each polyp box in truth (annotation order):
//     accept (uniform < p_tp), jitter x0, y0, x1, y1 (one Gaussian each), score
//   false-positive count (Poisson(fp_rate) by inversion of one uniform)
//   for each false positive: width, height (log-uniform in [8, short_edge/2]),
//     left, top (uniform so the box fits), score
// All draws happen whether or not a box is accepted, so the stream position
// depends only on the number of truth boxes.
std::vector<ScoredBox> synthetic_detect(const SyntheticDetectorConfig& config,
                                        std::int64_t frame_index, const FrameAnnotation& truth,
                                        int image_w, int image_h, Source source);

class SyntheticDetector final : public DetectorBackend {
 public:
  SyntheticDetector(SyntheticDetectorConfig config, Source source, std::string name = "synthetic");

  std::vector<ScoredBox> detect(const Frame& frame, const FrameAnnotation* truth) override;
  BackendDescriptor descriptor() const override { return {name_, config_.simulated_latency_ms}; }
  const SyntheticDetectorConfig& config() const { return config_; }

 private:
  SyntheticDetectorConfig config_;
  Source source_;
  std::string name_;
};

}  // namespace scopeline
