#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "scopeline/backends.hpp"
#include "scopeline/ensemble.hpp"

using namespace scopeline;

namespace {

ScoredBox sb(int x, int y, int w, int h, double score, Source s) {
  return {{x, y, w, h}, score, s, Label::polyp};
}

using Geometry = std::tuple<int, int, int, int>;

std::multiset<Geometry> geometries(const std::vector<ScoredBox>& v) {
  std::multiset<Geometry> out;
  for (const auto& b : v) out.insert({b.box.x, b.box.y, b.box.w, b.box.h});
  return out;
}

std::vector<ScoredBox> random_side(std::mt19937_64& rng, Source s, int max_count) {
  std::uniform_int_distribution<int> count(0, max_count);
  std::uniform_int_distribution<int> pos(0, 48);
  std::uniform_int_distribution<int> ext(4, 24);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<ScoredBox> out(static_cast<std::size_t>(count(rng)));
  for (auto& b : out) b = {{pos(rng), pos(rng), ext(rng), ext(rng)}, score(rng), s, Label::polyp};
  return out;
}

std::size_t pair_count(const std::vector<ScoredBox>& a, const std::vector<ScoredBox>& b, double t) {
  std::size_t n = 0;
  for (const auto& x : a)
    for (const auto& y : b) n += iou_exact(x.box, y.box).exceeds(t) ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("and_ensemble examples") {
  const EnsembleConfig cfg;
  const std::vector<ScoredBox> a{sb(10, 10, 50, 50, 0.9, Source::detector_a)};
  const std::vector<ScoredBox> b{sb(15, 15, 50, 50, 0.8, Source::detector_b)};
  const auto out = and_ensemble(a, b, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].box == BoundingBox{10, 10, 50, 50});
  CHECK(out[0].score == 0.9);
  CHECK(out[0].source == Source::ensemble);

  CHECK(and_ensemble(std::vector{sb(0, 0, 10, 10, 0.9, Source::detector_a)},
                     std::vector{sb(200, 200, 10, 10, 0.8, Source::detector_b)}, cfg)
            .empty());
  CHECK(and_ensemble({}, b, cfg).empty());
  CHECK(and_ensemble(a, {}, cfg).empty());
}

TEST_CASE("and_ensemble threshold is strict") {
  const std::vector<ScoredBox> thin{sb(0, 0, 1, 10, 0.9, Source::detector_a)};
  const std::vector<ScoredBox> square{sb(0, 0, 10, 10, 0.8, Source::detector_b)};
  REQUIRE(iou_exact(thin[0].box, square[0].box) == AreaRatio{10, 100});
  CHECK(and_ensemble(thin, square, {}).empty());

  const std::vector<ScoredBox> upper{sb(0, 0, 10, 5, 0.9, Source::detector_a)};
  const std::vector<ScoredBox> lower{sb(0, 4, 10, 5, 0.8, Source::detector_b)};
  REQUIRE(iou_exact(upper[0].box, lower[0].box) == AreaRatio{10, 90});
  CHECK(and_ensemble(upper, lower, {}).size() == 1);
}

TEST_CASE("and_ensemble never fabricates and is bounded by the pair count") {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 2000; ++iter) {
    const auto a = random_side(rng, Source::detector_a, 5);
    const auto b = random_side(rng, Source::detector_b, 5);
    EnsembleConfig cfg;
    cfg.iou_threshold = (iter % 4) * 0.1;
    const auto out = and_ensemble(a, b, cfg);
    REQUIRE(out.size() <= pair_count(a, b, cfg.iou_threshold));
    for (const auto& o : out) {
      const bool in_a = std::any_of(a.begin(), a.end(), [&](const auto& x) { return x.box == o.box && x.score == o.score; });
      const bool in_b = std::any_of(b.begin(), b.end(), [&](const auto& x) { return x.box == o.box && x.score == o.score; });
      REQUIRE((in_a || in_b));
      REQUIRE(o.source == Source::ensemble);
    }
  }
}

TEST_CASE("and_ensemble is symmetric in geometry") {
  std::mt19937_64 rng(37);
  for (int iter = 0; iter < 2000; ++iter) {
    const auto a = random_side(rng, Source::detector_a, 5);
    const auto b = random_side(rng, Source::detector_b, 5);
    const EnsembleConfig cfg;
    const auto ab = and_ensemble(a, b, cfg);
    // Same tags, swapped argument order: identical output.
    REQUIRE(and_ensemble(b, a, cfg) == ab);
    // Swapped tags as well: with distinct scores the kept geometry set is unchanged.
    auto a2 = b;
    auto b2 = a;
    for (auto& x : a2) x.source = Source::detector_a;
    for (auto& x : b2) x.source = Source::detector_b;
    REQUIRE(geometries(and_ensemble(a2, b2, cfg)) == geometries(ab));
  }
}

TEST_CASE("removing an input box only yields boxes confirmed on the full input") {
  std::mt19937_64 rng(41);
  const EnsembleConfig cfg;
  for (int iter = 0; iter < 1000; ++iter) {
    const auto a = random_side(rng, Source::detector_a, 5);
    const auto b = random_side(rng, Source::detector_b, 5);
    std::multiset<Geometry> confirmed;
    for (const auto& x : a)
      for (const auto& y : b)
        if (iou_exact(x.box, y.box).exceeds(cfg.iou_threshold)) {
          confirmed.insert({x.box.x, x.box.y, x.box.w, x.box.h});
          confirmed.insert({y.box.x, y.box.y, y.box.w, y.box.h});
        }
    for (std::size_t drop = 0; drop < a.size() + b.size(); ++drop) {
      auto ra = a;
      auto rb = b;
      if (drop < a.size()) ra.erase(ra.begin() + static_cast<long>(drop));
      else rb.erase(rb.begin() + static_cast<long>(drop - a.size()));
      for (const auto& g : geometries(and_ensemble(ra, rb, cfg))) REQUIRE(confirmed.count(g) > 0);
    }
  }
}

TEST_CASE("greedy suppression chains: removing a box can surface a different one") {
  // P suppresses Q, Q would suppress R. Without P, Q survives and R does not.
  const auto P = sb(0, 0, 10, 10, 0.9, Source::detector_a);
  const auto Q = sb(6, 0, 10, 10, 0.8, Source::detector_a);
  const auto R = sb(12, 0, 10, 10, 0.7, Source::detector_a);
  const std::vector<ScoredBox> b{sb(0, 0, 10, 10, 0.5, Source::detector_b),
                                 sb(12, 0, 10, 10, 0.5, Source::detector_b)};
  const auto full = and_ensemble(std::vector{P, Q, R}, b, {});
  REQUIRE(geometries(full) == std::multiset<Geometry>{{0, 0, 10, 10}, {12, 0, 10, 10}});
  const auto reduced = and_ensemble(std::vector{Q, R}, b, {});
  CHECK(geometries(reduced) == std::multiset<Geometry>{{6, 0, 10, 10}});
  CHECK(reduced.size() <= full.size());
}

TEST_CASE("size_aware examples") {
  const EnsembleConfig cfg{0.1, EnsembleMode::size_aware, 0.1};
  int calls = 0;
  auto never = [&] {
    ++calls;
    return std::vector<ScoredBox>{};
  };
  const std::vector<ScoredBox> small{sb(0, 0, 20, 20, 0.9, Source::detector_a)};
  auto r = size_aware_ensemble(small, never, 384, 288, cfg);
  REQUIRE(r.boxes.size() == 1);
  CHECK(r.boxes[0].box == BoundingBox{0, 0, 20, 20});
  CHECK(r.boxes[0].source == Source::ensemble);
  CHECK_FALSE(r.b_was_invoked);

  r = size_aware_ensemble({}, never, 384, 288, cfg);
  CHECK(r.boxes.empty());
  CHECK_FALSE(r.b_was_invoked);
  CHECK(calls == 0);

  const std::vector<ScoredBox> large{sb(50, 50, 100, 100, 0.9, Source::detector_a)};
  r = size_aware_ensemble(large, [] { return std::vector{sb(300, 200, 20, 20, 0.8, Source::detector_b)}; },
                          384, 288, cfg);
  CHECK(r.boxes.empty());
  CHECK(r.b_was_invoked);
}

TEST_CASE("size_aware never invokes B when every A box is small") {
  std::mt19937_64 rng(43);
  const EnsembleConfig cfg{0.1, EnsembleMode::size_aware, 0.1};
  std::uniform_int_distribution<int> pos(0, 300);
  std::uniform_int_distribution<int> ext(1, 28);  // 28/288 < 0.1
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<ScoredBox> a(static_cast<std::size_t>(iter % 6));
    for (auto& b : a) b = {{pos(rng), pos(rng) % 250, ext(rng), ext(rng)}, 0.5, Source::detector_a, Label::polyp};
    bool called = false;
    const auto r = size_aware_ensemble(a, [&] { called = true; return std::vector<ScoredBox>{}; }, 384, 288, cfg);
    REQUIRE_FALSE(called);
    REQUIRE_FALSE(r.b_was_invoked);
    REQUIRE(geometries(r.boxes) == geometries(nms(a, 0.1)));
  }
}

TEST_CASE("size_aware with a vanishing threshold degenerates to the AND rule") {
  std::mt19937_64 rng(47);
  const EnsembleConfig cfg{0.1, EnsembleMode::size_aware, 1e-12};
  for (int iter = 0; iter < 1000; ++iter) {
    const auto a = random_side(rng, Source::detector_a, 5);
    const auto b = random_side(rng, Source::detector_b, 5);
    bool called = false;
    const auto r = size_aware_ensemble(a, [&] { called = true; return b; }, 64, 64, cfg);
    REQUIRE(called == !a.empty());
    REQUIRE(r.b_was_invoked == !a.empty());
    REQUIRE(r.boxes == and_ensemble(a, b, cfg));
  }
}

TEST_CASE("size_aware propagates detector B failure") {
  const EnsembleConfig cfg{0.1, EnsembleMode::size_aware, 0.1};
  const std::vector<ScoredBox> large{sb(50, 50, 100, 100, 0.9, Source::detector_a)};
  CHECK_THROWS_AS(size_aware_ensemble(large, []() -> std::vector<ScoredBox> { throw BackendError("down"); },
                                      384, 288, cfg),
                  BackendError);
}

TEST_CASE("ensemble config validation") {
  CHECK_NOTHROW(EnsembleConfig{}.validate());
  CHECK_THROWS_AS((EnsembleConfig{1.5, EnsembleMode::and_rule, 0.1}.validate()), ConfigError);
  CHECK_THROWS_AS((EnsembleConfig{-0.1, EnsembleMode::and_rule, 0.1}.validate()), ConfigError);
  CHECK_THROWS_AS((EnsembleConfig{0.1, EnsembleMode::size_aware, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((EnsembleConfig{0.1, EnsembleMode::size_aware, 1.1}.validate()), ConfigError);
  CHECK(ensemble_mode_from_string("and") == EnsembleMode::and_rule);
  CHECK(ensemble_mode_from_string("size_aware") == EnsembleMode::size_aware);
  CHECK_THROWS_AS(ensemble_mode_from_string("or"), ConfigError);
}
