#include <doctest.h>

#include <chrono>
#include <thread>

#include "scopeline/dataset.hpp"
#include "scopeline/pipeline.hpp"
#include "test_util.hpp"

using namespace scopeline;

namespace {

// Returns fixed boxes; throws for frames listed in fail_on.
class ScriptedDetector final : public DetectorBackend {
 public:
  ScriptedDetector(std::vector<ScoredBox> boxes, double sim_ms, std::vector<std::int64_t> fail_on = {})
      : boxes_(std::move(boxes)), sim_ms_(sim_ms), fail_on_(std::move(fail_on)) {}

  std::vector<ScoredBox> detect(const Frame& frame, const FrameAnnotation*) override {
    count_invocation();
    for (auto f : fail_on_)
      if (f == frame.frame_index) throw BackendError("scripted failure");
    return boxes_;
  }
  BackendDescriptor descriptor() const override { return {"scripted", sim_ms_}; }

 private:
  std::vector<ScoredBox> boxes_;
  double sim_ms_;
  std::vector<std::int64_t> fail_on_;
};

// Sleeps, then returns nothing. Used to make the later frame finish first.
class SlowDetector final : public DetectorBackend {
 public:
  std::vector<ScoredBox> detect(const Frame& frame, const FrameAnnotation*) override {
    count_invocation();
    std::this_thread::sleep_for(std::chrono::milliseconds(frame.frame_index % 2 ? 0 : 3));
    return {};
  }
  BackendDescriptor descriptor() const override { return {"slow", 0.0}; }
};

Frame frame_of(const Raster& r, std::int64_t idx = 0) { return make_frame(idx, 60.0, r); }

ScoredBox box(int x, int y, int w, int h, double s, Source src) { return {{x, y, w, h}, s, src, Label::polyp}; }

PipelineConfig noise_free_config(EnsembleMode ens = EnsembleMode::and_rule,
                                 ExecutionMode mode = ExecutionMode::sequential) {
  PipelineConfig cfg;
  cfg.gate.threshold = 10.0;
  cfg.detector_a.synthetic.seed = 1;
  cfg.detector_b.synthetic.seed = 2;
  cfg.ensemble.mode = ens;
  cfg.mode = mode;
  return cfg;
}

}  // namespace

TEST_CASE("blurry frame short-circuits") {
  auto a = std::make_unique<ScriptedDetector>(std::vector{box(0, 0, 10, 10, 0.9, Source::detector_a)}, 20);
  auto b = std::make_unique<ScriptedDetector>(std::vector{box(0, 0, 10, 10, 0.9, Source::detector_b)}, 20);
  auto* ap = a.get();
  auto* bp = b.get();
  Pipeline p(noise_free_config(), std::make_unique<HeuristicBlurGate>(10.0, 3.0), std::move(a), std::move(b));
  const auto r = p.process_frame(frame_of(flat_raster(32, 24, 120, 120, 120)));
  CHECK(r.blurry);
  CHECK(r.detections.empty());
  CHECK(r.stage_latencies.count(stage::detector_a) == 0);
  CHECK(r.stage_latencies.count(stage::detector_b) == 0);
  CHECK(r.stage_latencies.count(stage::gate) == 1);
  CHECK(r.stage_latencies.at(stage::total_wall).simulated_ms == 3.0);
  CHECK(ap->invocations() == 0);
  CHECK(bp->invocations() == 0);
}

TEST_CASE("noise-free synthetic detectors through the whole pipeline") {
  const FrameAnnotation truth{"v", 0, {{{40, 30, 50, 40}, Label::polyp}}};
  const Raster clear = textured_raster(384, 288, 5);
  for (auto ens : {EnsembleMode::and_rule, EnsembleMode::size_aware}) {
    for (auto mode : {ExecutionMode::sequential, ExecutionMode::parallel}) {
      Pipeline p = Pipeline::from_config(noise_free_config(ens, mode));
      const auto r = p.process_frame(frame_of(clear), &truth);
      REQUIRE_FALSE(r.failed);
      CHECK_FALSE(r.blurry);
      REQUIRE(r.detections.size() == 1);
      CHECK(r.detections[0].box == BoundingBox{40, 30, 50, 40});
      CHECK(r.detections[0].source == Source::ensemble);
    }
  }
}

TEST_CASE("simulated latency accounting") {
  const Raster clear = textured_raster(64, 48, 8);
  auto run = [&](ExecutionMode mode) {
    PipelineConfig cfg = noise_free_config(EnsembleMode::and_rule, mode);
    Pipeline p(cfg, std::make_unique<HeuristicBlurGate>(10.0, 3.0),
               std::make_unique<ScriptedDetector>(std::vector<ScoredBox>{}, 20),
               std::make_unique<ScriptedDetector>(std::vector<ScoredBox>{}, 20));
    return p.process_frame(frame_of(clear));
  };
  const auto seq = run(ExecutionMode::sequential);
  CHECK(seq.stage_latencies.at(stage::total_wall).simulated_ms == 43.0);
  CHECK(seq.accounted_ms(stage::total_wall).value() == doctest::Approx(43.0).epsilon(1.0 / 43.0));
  double sum = 0.0;
  for (const auto& [name, t] : seq.stage_latencies)
    if (name != stage::total_wall) sum += t.accounted();
  CHECK(seq.accounted_ms(stage::total_wall).value() >= sum - 0.05);

  const auto par = run(ExecutionMode::parallel);
  CHECK(par.stage_latencies.at(stage::total_wall).simulated_ms == 23.0);
  const double expected = par.accounted_ms(stage::gate).value() +
                          std::max(par.accounted_ms(stage::detector_a).value(),
                                   par.accounted_ms(stage::detector_b).value()) +
                          par.accounted_ms(stage::ensemble).value();
  CHECK(std::abs(par.accounted_ms(stage::total_wall).value() - expected) <= 1.0);
}

TEST_CASE("size_aware skips detector B and its cost when A sees only small boxes") {
  const Raster clear = textured_raster(384, 288, 8);
  auto b = std::make_unique<ScriptedDetector>(std::vector<ScoredBox>{}, 20);
  auto* bp = b.get();
  Pipeline p(noise_free_config(EnsembleMode::size_aware), std::make_unique<HeuristicBlurGate>(10.0, 3.0),
             std::make_unique<ScriptedDetector>(std::vector{box(5, 5, 20, 20, 0.9, Source::detector_a)}, 20),
             std::move(b));
  const auto r = p.process_frame(frame_of(clear));
  CHECK(bp->invocations() == 0);
  CHECK(r.stage_latencies.count(stage::detector_b) == 0);
  CHECK(r.stage_latencies.at(stage::total_wall).simulated_ms == 23.0);
  REQUIRE(r.detections.size() == 1);
  CHECK(r.detections[0].box == BoundingBox{5, 5, 20, 20});
}

TEST_CASE("backend failure marks the frame failed and the stream continues") {
  test::TempDir dir;
  SyntheticDatasetSpec spec;
  spec.frames = 6;
  spec.width = 48;
  spec.height = 32;
  write_dataset(dir.path(), generate_dataset(spec));
  const auto video_dir = dir.path() / "video_000";

  for (auto mode : {ExecutionMode::sequential, ExecutionMode::parallel}) {
    Pipeline p(noise_free_config(EnsembleMode::and_rule, mode), nullptr,
               std::make_unique<ScriptedDetector>(std::vector<ScoredBox>{}, 0),
               std::make_unique<ScriptedDetector>(std::vector<ScoredBox>{}, 0, std::vector<std::int64_t>{2, 4}));
    FrameStream s(video_dir);
    std::vector<PipelineResult> got;
    const auto summary = p.process_stream(s, [&](const PipelineResult& r) { got.push_back(r); });
    REQUIRE(got.size() == 6);
    CHECK(summary.failed == 2);
    CHECK(got[2].failed);
    CHECK(got[2].error.find("scripted failure") != std::string::npos);
    CHECK(got[4].failed);
    CHECK_FALSE(got[3].failed);
    CHECK(got[0].video_id == "video_000");
  }
}

TEST_CASE("sink sees frames in order in both execution modes") {
  test::TempDir dir;
  SyntheticDatasetSpec spec;
  spec.frames = 20;
  spec.width = 32;
  spec.height = 24;
  write_dataset(dir.path(), generate_dataset(spec));
  for (auto mode : {ExecutionMode::sequential, ExecutionMode::parallel}) {
    Pipeline p(noise_free_config(EnsembleMode::and_rule, mode), nullptr, std::make_unique<SlowDetector>(),
               std::make_unique<SlowDetector>());
    FrameStream s(dir.path() / "video_000");
    std::vector<std::int64_t> order;
    p.process_stream(s, [&](const PipelineResult& r) { order.push_back(r.frame_index); });
    REQUIRE(order.size() == 20);
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == static_cast<std::int64_t>(i));
  }
}

TEST_CASE("30 blurry of 100 frames are counted and never reach a detector") {
  test::TempDir dir;
  SyntheticDatasetSpec spec;
  spec.frames = 100;
  spec.blur_fraction = 0.3;
  spec.width = 64;
  spec.height = 48;
  spec.seed = 12;
  const auto videos = generate_dataset(spec);
  write_dataset(dir.path(), videos);
  const AnnotationIndex truth = read_annotations(dir.path() / "annotations.jsonl");

  PipelineConfig cfg = noise_free_config();
  cfg.gate.threshold = kDefaultBlurThreshold;
  Pipeline p = Pipeline::from_config(cfg);
  FrameStream s(dir.path() / "video_000");
  std::int64_t detector_calls_expected = 0;
  const auto summary = p.process_stream(
      s,
      [&](const PipelineResult& r) {
        CHECK(r.blurry == videos[0].blurry[static_cast<std::size_t>(r.frame_index)]);
        if (r.blurry) CHECK(r.detections.empty());
        else ++detector_calls_expected;
      },
      [&](std::int64_t idx) -> const FrameAnnotation* {
        const auto& v = truth.at("video_000");
        auto it = v.find(idx);
        return it == v.end() ? nullptr : &it->second;
      });
  CHECK(summary.frames == 100);
  CHECK(summary.blurry == 30);
  CHECK(p.detector_a().invocations() == static_cast<std::uint64_t>(detector_calls_expected));
  CHECK(p.detector_b().invocations() == 70);
}

TEST_CASE("empty stream yields an empty summary") {
  test::TempDir dir;
  write_video_manifest(dir.path() / "manifest.json", {"none", 60.0, 8, 8, 0});
  Pipeline p = Pipeline::from_config(noise_free_config());
  FrameStream s(dir.path());
  int calls = 0;
  const auto summary = p.process_stream(s, [&](const PipelineResult&) { ++calls; });
  CHECK(summary.frames == 0);
  CHECK(calls == 0);
  CHECK(summary.latency.throughput_fps == 0.0);
}

TEST_CASE("pipeline runs are deterministic") {
  test::TempDir dir;
  SyntheticDatasetSpec spec;
  spec.frames = 100;
  spec.blur_fraction = 0.2;
  spec.width = 96;
  spec.height = 72;
  write_dataset(dir.path(), generate_dataset(spec));
  const AnnotationIndex truth = read_annotations(dir.path() / "annotations.jsonl");
  auto run = [&](ExecutionMode mode) {
    PipelineConfig cfg;
    cfg.mode = mode;
    cfg.detector_a.synthetic = {1, 0.9, 1.0, 2.0, {0.5, 1.0}, {0.1, 0.6}, 20.0};
    cfg.detector_b.synthetic = {2, 0.9, 1.0, 2.0, {0.5, 1.0}, {0.1, 0.6}, 20.0};
    cfg.gate.simulated_latency_ms = 3.0;
    Pipeline p = Pipeline::from_config(cfg);
    FrameStream s(dir.path() / "video_000");
    std::string out;
    p.process_stream(
        s, [&](const PipelineResult& r) { out += result_to_json_line(r, ResultLatency::simulated) + "\n"; },
        [&](std::int64_t idx) -> const FrameAnnotation* {
          const auto& v = truth.at("video_000");
          auto it = v.find(idx);
          return it == v.end() ? nullptr : &it->second;
        });
    return out;
  };
  const std::string first = run(ExecutionMode::sequential);
  CHECK(first == run(ExecutionMode::sequential));
  const std::string par = run(ExecutionMode::parallel);
  CHECK(par == run(ExecutionMode::parallel));
  CHECK(first.find("\"total_wall\":43.0") != std::string::npos);
  CHECK(par.find("\"total_wall\":23.0") != std::string::npos);
}

TEST_CASE("result lines round trip") {
  PipelineResult r;
  r.video_id = "v";
  r.frame_index = 7;
  r.detections = {box(1, 2, 3, 4, 0.5, Source::ensemble)};
  r.stage_latencies[stage::gate] = {0.25, 3.0};
  r.stage_latencies[stage::total_wall] = {1.0, 3.0};
  const std::string line = result_to_json_line(r, ResultLatency::simulated);
  CHECK(line ==
        R"({"video_id":"v","frame_index":7,"blurry":false,"failed":false,"detections":[{"x":1,"y":2,"w":3,"h":4,"score":0.5,"source":"ensemble","label":"polyp"}],"stage_latencies":{"gate":3.0,"total_wall":3.0}})");
  const auto back = result_from_json_line(line);
  CHECK(back.video_id == "v");
  CHECK(back.frame_index == 7);
  CHECK(back.detections == r.detections);
  CHECK(result_to_json_line(r, ResultLatency::accounted).find("\"gate\":3.25") != std::string::npos);
}

TEST_CASE("latency report percentiles are ordered") {
  std::vector<PipelineResult> rs;
  for (int i = 1; i <= 100; ++i) {
    PipelineResult r;
    r.stage_latencies[stage::total_wall] = {0.0, static_cast<double>(i)};
    r.stage_latencies[stage::gate] = {0.0, static_cast<double>((i * 37) % 11)};
    rs.push_back(r);
  }
  const auto rep = make_latency_report(rs);
  const auto& tw = rep.stages.at(stage::total_wall);
  CHECK(tw.p50 == 50.0);
  CHECK(tw.p95 == 95.0);
  CHECK(tw.max == 100.0);
  CHECK(tw.mean == doctest::Approx(50.5));
  CHECK(rep.throughput_fps == doctest::Approx(100.0 * 1000.0 / 5050.0));
  for (const auto& [name, s] : rep.stages) {
    CHECK(s.p50 <= s.p95);
    CHECK(s.p95 <= s.max);
  }
}

TEST_CASE("pipeline config JSON") {
  const auto j = nlohmann::json::parse(R"({
    "gate": {"kind": "heuristic", "threshold": 50, "simulated_latency_ms": 3},
    "detector_a": {"kind": "synthetic", "synthetic": {"seed": 1, "p_tp": 0.9, "fp_rate": 1.0, "jitter_px": 2}},
    "detector_b": {"kind": "external", "transport": "tcp", "host": "127.0.0.1", "port": 9000,
                   "simulated_latency_ms": 20},
    "ensemble": {"mode": "size_aware", "iou_threshold": 0.2, "short_edge_ratio_threshold": 0.15},
    "execution_mode": "parallel"
  })");
  const PipelineConfig cfg = pipeline_config_from_json(j);
  CHECK(cfg.gate.threshold == 50.0);
  CHECK(cfg.gate.simulated_latency_ms == 3.0);
  CHECK(cfg.detector_a.synthetic.p_tp == 0.9);
  CHECK(cfg.detector_b.kind == DetectorSpec::Kind::external);
  CHECK(cfg.detector_b.endpoint.port == 9000);
  CHECK(cfg.ensemble.mode == EnsembleMode::size_aware);
  CHECK(cfg.ensemble.short_edge_ratio_threshold == 0.15);
  CHECK(cfg.mode == ExecutionMode::parallel);

  const auto again = pipeline_config_from_json(nlohmann::json::parse(pipeline_config_to_json(cfg).dump()));
  CHECK(pipeline_config_to_json(again).dump() == pipeline_config_to_json(cfg).dump());

  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"gates": {}})")), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"execution_mode": "async"})")), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"ensemble": {"iou_threshold": 2}})")),
                  ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json::parse(R"({"detector_a": {"kind": "external"}})")),
                  ConfigError);
  CHECK_THROWS_AS(
      pipeline_config_from_json(nlohmann::json::parse(R"({"detector_a": {"synthetic": {"p_tp": 3}}})")),
      ConfigError);
}
