#pragma once

// Random small matching instances shared by the unit and acceptance suites.

#include <random>
#include <set>

#include "oracles.hpp"
#include "scopeline/annotation.hpp"
#include "scopeline/eval.hpp"

namespace scopeline::test {

struct MatchCase {
  std::vector<ScoredBox> predictions;
  FrameAnnotation truth;
};

// Up to 3 truth and 3 predicted boxes on a 48x48 canvas. Predictions are
// mostly jittered copies of truth boxes so that many pairs clear IoU 0.5.
// With disjoint_truth, truth boxes never overlap each other.
inline MatchCase random_match_case(std::mt19937_64& rng, bool disjoint_truth) {
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_int_distribution<int> pos(0, 40);
  std::uniform_int_distribution<int> ext(6, 20);
  std::uniform_int_distribution<int> jitter(-3, 3);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  MatchCase c;
  c.truth.video_id = "m";
  const int n_truth = count(rng);
  for (int tries = 0; static_cast<int>(c.truth.boxes.size()) < n_truth && tries < 200; ++tries) {
    const BoundingBox b{pos(rng), pos(rng), ext(rng), ext(rng)};
    bool clash = false;
    for (const auto& o : c.truth.boxes) clash = clash || intersection_area(o.box, b) > 0;
    if (disjoint_truth && clash) continue;
    c.truth.boxes.push_back({b, Label::polyp});
  }
  const int n_pred = count(rng);
  for (int i = 0; i < n_pred; ++i) {
    BoundingBox b;
    if (!c.truth.boxes.empty() && rng() % 4 != 0) {
      const auto& t = c.truth.boxes[rng() % c.truth.boxes.size()].box;
      b = {std::max(0, t.x + jitter(rng)), std::max(0, t.y + jitter(rng)), std::max(1, t.w + jitter(rng)),
           std::max(1, t.h + jitter(rng))};
    } else {
      b = {pos(rng), pos(rng), ext(rng), ext(rng)};
    }
    c.predictions.push_back({b, score(rng), Source::ensemble, Label::polyp});
  }
  return c;
}

// True when all prediction-truth IoUs are pairwise distinct (and so are the scores).
inline bool distinct_ious(const MatchCase& c) {
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& p : c.predictions) {
    for (const auto& t : c.truth.boxes) {
      auto r = iou_exact(p.box, t.box);
      // Normalise the fraction so equal ratios collide.
      std::int64_t a = r.intersection;
      std::int64_t b = r.union_area;
      std::int64_t g = std::gcd(a, b);
      if (g > 0) {
        a /= g;
        b /= g;
      }
      if (!seen.insert({a, b}).second) return false;
    }
  }
  std::set<double> scores;
  for (const auto& p : c.predictions)
    if (!scores.insert(p.score).second) return false;
  return true;
}

inline std::int64_t exhaustive_tp(const MatchCase& c, double threshold) {
  const auto& P = c.predictions;
  const auto& T = c.truth.boxes;
  return oracle::best_assignment(
             P.size(), T.size(),
             [&](std::size_t p, std::size_t g) {
               const auto px = oracle::pixel_iou(P[p].box, T[g].box);
               return static_cast<double>(px.intersection) >= threshold * static_cast<double>(px.union_area);
             },
             [&](std::size_t p, std::size_t g) {
               const auto px = oracle::pixel_iou(P[p].box, T[g].box);
               return static_cast<double>(px.intersection) / static_cast<double>(px.union_area);
             })
      .tp;
}

}  // namespace scopeline::test
