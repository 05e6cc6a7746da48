#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "scopeline/geometry.hpp"

namespace scopeline {

enum class EnsembleMode { and_rule, size_aware };

std::string_view to_string(EnsembleMode m);
EnsembleMode ensemble_mode_from_string(std::string_view s);

struct EnsembleConfig {
  double iou_threshold = 0.1;
  EnsembleMode mode = EnsembleMode::and_rule;
  // Only used in size_aware mode.
  double short_edge_ratio_threshold = 0.1;

  // Throws ConfigError unless iou_threshold is in [0, 1] and the short-edge
  // threshold is in (0, 1].
  void validate() const;
};

// A box from either side survives only if the other side has a box with IoU
// strictly above cfg.iou_threshold. Survivors from both sides are reduced by
// NMS at the same threshold and re-tagged Source::ensemble.
std::vector<ScoredBox> and_ensemble(std::span<const ScoredBox> a, std::span<const ScoredBox> b,
                                    const EnsembleConfig& cfg);

struct SizeAwareResult {
  std::vector<ScoredBox> boxes;
  bool b_was_invoked = false;
};

using DetectorSupplier = std::function<std::vector<ScoredBox>()>;

// Detector-A boxes whose short-edge ratio is below the threshold are kept
// as-is; the rest go through and_ensemble against detector B, which is only
// run (via b_supplier) when at least one such large box exists.
SizeAwareResult size_aware_ensemble(std::span<const ScoredBox> a, const DetectorSupplier& b_supplier,
                                    int image_w, int image_h, const EnsembleConfig& cfg);

}  // namespace scopeline
