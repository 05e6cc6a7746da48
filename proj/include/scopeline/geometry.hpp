#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace scopeline {

// Axis-aligned box on the pixel grid; covers [x, x+w) x [y, y+h).
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  std::int64_t area() const { return std::int64_t{w} * h; }
  int right() const { return x + w; }
  int bottom() const { return y + h; }

  bool valid() const { return x >= 0 && y >= 0 && w >= 1 && h >= 1; }
  bool within(int image_w, int image_h) const {
    return valid() && right() <= image_w && bottom() <= image_h;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

// Declaration order is the NMS tie-break order.
enum class Source : std::uint8_t { detector_a, detector_b, ensemble };
enum class Label : std::uint8_t { polyp, instrument };

std::string_view to_string(Source s);
std::string_view to_string(Label l);
Source source_from_string(std::string_view s);
Label label_from_string(std::string_view s);

struct ScoredBox {
  BoundingBox box;
  double score = 0.0;
  Source source = Source::detector_a;
  Label label = Label::polyp;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

// Exact intersection-over-union as a ratio of integer pixel counts.
struct AreaRatio {
  std::int64_t intersection = 0;
  std::int64_t union_area = 1;

  double value() const {
    return static_cast<double>(intersection) / static_cast<double>(union_area);
  }
  // Strict comparison against a real threshold without rounding the ratio.
  bool exceeds(double threshold) const;
  bool at_least(double threshold) const;

  friend bool operator==(const AreaRatio& a, const AreaRatio& b) {
    return a.intersection * b.union_area == b.intersection * a.union_area;
  }
};

std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b);
AreaRatio iou_exact(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);

// min(w, h) / min(image_w, image_h). Throws std::invalid_argument for an
// image extent with a zero (or negative) dimension.
double short_edge_ratio(const BoundingBox& box, int image_w, int image_h);

// Greedy NMS. Candidates are visited by descending score, then Source order,
// then input position; a candidate is dropped when its IoU with an already
// kept box is strictly greater than iou_threshold.
std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold);

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, nonzero = set

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool valid() const {
    return width >= 0 && height >= 0 &&
           bits.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
};

enum class Connectivity { four = 4, eight = 8 };

inline constexpr std::int64_t kDefaultMinComponentArea = 16;

// One tight box per connected component with at least min_area pixels,
// ordered by the raster position of each component's first pixel.
std::vector<BoundingBox> mask_to_boxes(const BinaryMask& mask,
                                       std::int64_t min_area = kDefaultMinComponentArea,
                                       Connectivity connectivity = Connectivity::eight);

}  // namespace scopeline
