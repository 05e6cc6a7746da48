#include "scopeline/ensemble.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <string>

#include "scopeline/backends.hpp"

namespace scopeline {

std::string_view to_string(EnsembleMode m) {
  return m == EnsembleMode::and_rule ? "and" : "size_aware";
}

EnsembleMode ensemble_mode_from_string(std::string_view s) {
  if (s == "and") return EnsembleMode::and_rule;
  if (s == "size_aware") return EnsembleMode::size_aware;
  throw ConfigError(fmt::format("unknown ensemble mode '{}' (expected and | size_aware)", s));
}

void EnsembleConfig::validate() const {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError(fmt::format("iou_threshold {} outside [0, 1]", iou_threshold));
  }
  if (!(short_edge_ratio_threshold > 0.0 && short_edge_ratio_threshold <= 1.0)) {
    throw ConfigError(
        fmt::format("short_edge_ratio_threshold {} outside (0, 1]", short_edge_ratio_threshold));
  }
}

namespace {

bool has_partner(const ScoredBox& box, std::span<const ScoredBox> others, double threshold) {
  return std::any_of(others.begin(), others.end(), [&](const ScoredBox& o) {
    return iou_exact(box.box, o.box).exceeds(threshold);
  });
}

std::vector<ScoredBox> retag(std::vector<ScoredBox> boxes) {
  for (auto& b : boxes) b.source = Source::ensemble;
  return boxes;
}

}  // namespace

std::vector<ScoredBox> and_ensemble(std::span<const ScoredBox> a, std::span<const ScoredBox> b,
                                    const EnsembleConfig& cfg) {
  std::vector<ScoredBox> confirmed;
  for (const auto& box : a) {
    if (has_partner(box, b, cfg.iou_threshold)) confirmed.push_back(box);
  }
  for (const auto& box : b) {
    if (has_partner(box, a, cfg.iou_threshold)) confirmed.push_back(box);
  }
  // NMS runs on the original source tags so detector A wins score ties.
  return retag(nms(confirmed, cfg.iou_threshold));
}

SizeAwareResult size_aware_ensemble(std::span<const ScoredBox> a, const DetectorSupplier& b_supplier,
                                    int image_w, int image_h, const EnsembleConfig& cfg) {
  std::vector<ScoredBox> small;
  std::vector<ScoredBox> large;
  for (const auto& box : a) {
    (short_edge_ratio(box.box, image_w, image_h) < cfg.short_edge_ratio_threshold ? small : large)
        .push_back(box);
  }

  SizeAwareResult result;
  std::vector<ScoredBox> merged = small;
  if (!large.empty()) {
    result.b_was_invoked = true;
    const std::vector<ScoredBox> b = b_supplier();
    const auto confirmed = and_ensemble(large, b, cfg);
    merged.insert(merged.end(), confirmed.begin(), confirmed.end());
  }
  result.boxes = retag(nms(merged, cfg.iou_threshold));
  return result;
}

}  // namespace scopeline
