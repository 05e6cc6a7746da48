#include "scopeline/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace scopeline {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::detector_a: return "detector-A";
    case Source::detector_b: return "detector-B";
    case Source::ensemble: return "ensemble";
  }
  return "unknown";
}

std::string_view to_string(Label l) {
  return l == Label::polyp ? "polyp" : "instrument";
}

Source source_from_string(std::string_view s) {
  if (s == "detector-A") return Source::detector_a;
  if (s == "detector-B") return Source::detector_b;
  if (s == "ensemble") return Source::ensemble;
  throw std::invalid_argument("unknown source tag '" + std::string(s) + "'");
}

Label label_from_string(std::string_view s) {
  if (s == "polyp") return Label::polyp;
  if (s == "instrument") return Label::instrument;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

// intersection / union > t  <=>  intersection > t * union, evaluated in long
// double so that areas up to 2^40 stay exact.
namespace {

// Thresholds arrive as short decimals (0.1, 0.5). For such a threshold t and
// integer areas, I - t*U is either exactly zero or at least 1e-6 away, so a
// tiny band absorbs the binary rounding of t without merging distinct cases.
constexpr long double kThresholdSlack = 1e-7L;

long double threshold_gap(const AreaRatio& r, double threshold) {
  return static_cast<long double>(r.intersection) -
         static_cast<long double>(threshold) * static_cast<long double>(r.union_area);
}

}  // namespace

bool AreaRatio::exceeds(double threshold) const { return threshold_gap(*this, threshold) > kThresholdSlack; }

bool AreaRatio::at_least(double threshold) const { return threshold_gap(*this, threshold) >= -kThresholdSlack; }

std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const std::int64_t ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0;
  return iw * ih;
}

AreaRatio iou_exact(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t inter = intersection_area(a, b);
  return {inter, a.area() + b.area() - inter};
}

double iou(const BoundingBox& a, const BoundingBox& b) { return iou_exact(a, b).value(); }

double short_edge_ratio(const BoundingBox& box, int image_w, int image_h) {
  if (image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("short_edge_ratio: image extent " + std::to_string(image_w) +
                                "x" + std::to_string(image_h) + " has a zero dimension");
  }
  return static_cast<double>(std::min(box.w, box.h)) /
         static_cast<double>(std::min(image_w, image_h));
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (boxes[i].score != boxes[j].score) return boxes[i].score > boxes[j].score;
    return boxes[i].source < boxes[j].source;
  });

  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    const ScoredBox& cand = boxes[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredBox& k) {
      return iou_exact(k.box, cand.box).exceeds(iou_threshold);
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

namespace {

// Union-find over provisional labels, smallest label wins so that the root of
// every component is the label assigned at its first raster pixel.
class LabelForest {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
};

struct ComponentStats {
  int min_x, min_y, max_x, max_y;
  std::int64_t count = 0;
};

}  // namespace

std::vector<BoundingBox> mask_to_boxes(const BinaryMask& mask, std::int64_t min_area,
                                       Connectivity connectivity) {
  if (!mask.valid()) throw std::invalid_argument("mask_to_boxes: bits size does not match extent");
  const int w = mask.width;
  const int h = mask.height;
  std::vector<int> labels(mask.bits.size(), -1);
  LabelForest forest;
  const bool diag = connectivity == Connectivity::eight;

  // First pass: provisional labels from already-visited neighbours.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int best = -1;
      auto consider = [&](int nx, int ny) {
        if (nx < 0 || nx >= w || ny < 0) return;
        const int l = labels[static_cast<std::size_t>(ny) * w + nx];
        if (l < 0) return;
        if (best < 0) {
          best = l;
        } else {
          forest.unite(best, l);
          best = std::min(best, l);
        }
      };
      consider(x - 1, y);
      consider(x, y - 1);
      if (diag) {
        consider(x - 1, y - 1);
        consider(x + 1, y - 1);
      }
      labels[static_cast<std::size_t>(y) * w + x] = best < 0 ? forest.make() : best;
    }
  }

  // Second pass: accumulate extents per root.
  std::vector<ComponentStats> stats(forest.size(), ComponentStats{w, h, -1, -1, 0});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels[static_cast<std::size_t>(y) * w + x];
      if (l < 0) continue;
      ComponentStats& s = stats[forest.find(l)];
      s.min_x = std::min(s.min_x, x);
      s.min_y = std::min(s.min_y, y);
      s.max_x = std::max(s.max_x, x);
      s.max_y = std::max(s.max_y, y);
      ++s.count;
    }
  }

  // Roots are created in raster order of each component's first pixel.
  std::vector<BoundingBox> out;
  for (std::size_t l = 0; l < stats.size(); ++l) {
    if (forest.find(static_cast<int>(l)) != static_cast<int>(l)) continue;
    const ComponentStats& s = stats[l];
    if (s.count == 0 || s.count < min_area) continue;
    out.push_back({s.min_x, s.min_y, s.max_x - s.min_x + 1, s.max_y - s.min_y + 1});
  }
  return out;
}

}  // namespace scopeline
