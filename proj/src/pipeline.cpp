#include "scopeline/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

namespace scopeline {

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct TimedDetections {
  std::vector<ScoredBox> boxes;
  StageTiming timing;
};

TimedDetections run_detector(DetectorBackend& d, const Frame& frame, const FrameAnnotation* truth) {
  const auto t0 = Clock::now();
  TimedDetections out;
  out.boxes = d.detect(frame, truth);
  out.timing = {ms_since(t0), d.descriptor().simulated_latency_ms};
  return out;
}

std::unique_ptr<DetectorBackend> make_detector(const DetectorSpec& spec, Source source) {
  const std::string slot = source == Source::detector_a ? "A" : "B";
  if (spec.kind == DetectorSpec::Kind::synthetic) {
    return std::make_unique<SyntheticDetector>(spec.synthetic, source, "synthetic-" + slot);
  }
  return std::make_unique<ExternalDetector>(spec.endpoint.factory(), source,
                                            "external-" + slot + " (" + spec.endpoint.describe() + ")",
                                            spec.simulated_latency_ms);
}

}  // namespace

std::optional<double> PipelineResult::accounted_ms(const std::string& name) const {
  auto it = stage_latencies.find(name);
  if (it == stage_latencies.end()) return std::nullopt;
  return it->second.accounted();
}

Pipeline::Pipeline(PipelineConfig config, std::unique_ptr<BlurGate> gate,
                   std::unique_ptr<DetectorBackend> detector_a,
                   std::unique_ptr<DetectorBackend> detector_b)
    : config_(std::move(config)),
      gate_(std::move(gate)),
      detector_a_(std::move(detector_a)),
      detector_b_(std::move(detector_b)) {
  config_.ensemble.validate();
  if (!detector_a_ || !detector_b_) throw ConfigError("both detector slots must be bound");
}

Pipeline Pipeline::from_config(const PipelineConfig& config) {
  config.validate();
  std::unique_ptr<BlurGate> gate;
  switch (config.gate.kind) {
    case GateKind::heuristic:
      gate = std::make_unique<HeuristicBlurGate>(config.gate.threshold,
                                                 config.gate.simulated_latency_ms);
      break;
    case GateKind::external:
      gate = std::make_unique<ExternalBlurGate>(config.gate.endpoint.factory(),
                                                config.gate.simulated_latency_ms);
      break;
    case GateKind::disabled: break;
  }
  return Pipeline(config, std::move(gate), make_detector(config.detector_a, Source::detector_a),
                  make_detector(config.detector_b, Source::detector_b));
}

PipelineResult Pipeline::process_frame(const Frame& frame, const FrameAnnotation* truth) {
  const auto t0 = Clock::now();
  PipelineResult r;
  r.frame_index = frame.frame_index;
  double simulated_path = 0.0;

  auto finish = [&] {
    r.stage_latencies[stage::total_wall] = {ms_since(t0), simulated_path};
    return std::move(r);
  };

  try {
    if (gate_) {
      const auto tg = Clock::now();
      r.blurry = gate_->classify(frame) == BlurVerdict::blurry;
      const double sim = gate_->descriptor().simulated_latency_ms;
      r.stage_latencies[stage::gate] = {ms_since(tg), sim};
      simulated_path += sim;
    }
    if (r.blurry) return finish();

    const bool parallel = config_.mode == ExecutionMode::parallel;
    if (config_.ensemble.mode == EnsembleMode::and_rule) {
      TimedDetections a;
      TimedDetections b;
      if (parallel) {
        auto fb = std::async(std::launch::async,
                             [&] { return run_detector(*detector_b_, frame, truth); });
        try {
          a = run_detector(*detector_a_, frame, truth);
        } catch (...) {
          fb.wait();
          throw;
        }
        b = fb.get();
        simulated_path += std::max(a.timing.simulated_ms, b.timing.simulated_ms);
      } else {
        a = run_detector(*detector_a_, frame, truth);
        b = run_detector(*detector_b_, frame, truth);
        simulated_path += a.timing.simulated_ms + b.timing.simulated_ms;
      }
      r.stage_latencies[stage::detector_a] = a.timing;
      r.stage_latencies[stage::detector_b] = b.timing;
      const auto te = Clock::now();
      r.detections = and_ensemble(a.boxes, b.boxes, config_.ensemble);
      r.stage_latencies[stage::ensemble] = {ms_since(te), 0.0};
    } else {
      // Detector B depends on A's sizes, so the two never overlap here.
      TimedDetections a = run_detector(*detector_a_, frame, truth);
      r.stage_latencies[stage::detector_a] = a.timing;
      simulated_path += a.timing.simulated_ms;
      std::optional<StageTiming> b_timing;
      const auto te = Clock::now();
      SizeAwareResult sa = size_aware_ensemble(
          a.boxes,
          [&] {
            TimedDetections b = run_detector(*detector_b_, frame, truth);
            b_timing = b.timing;
            return std::move(b.boxes);
          },
          frame.width, frame.height, config_.ensemble);
      double ensemble_ms = ms_since(te);
      if (b_timing) {
        ensemble_ms = std::max(0.0, ensemble_ms - b_timing->measured_ms);
        r.stage_latencies[stage::detector_b] = *b_timing;
        simulated_path += b_timing->simulated_ms;
      }
      r.stage_latencies[stage::ensemble] = {ensemble_ms, 0.0};
      r.detections = std::move(sa.boxes);
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.detections.clear();
    r.error = fmt::format("frame {}: {}", frame.frame_index, e.what());
    spdlog::warn("{}", r.error);
  }
  return finish();
}

RunSummary Pipeline::process_stream(FrameStream& stream, const ResultSink& sink,
                                    const TruthLookup& truth) {
  RunSummary summary;
  std::vector<PipelineResult> timings;
  while (auto item = stream.next()) {
    PipelineResult r;
    if (item->frame) {
      const FrameAnnotation* t = truth ? truth(item->frame_index) : nullptr;
      r = process_frame(*item->frame, t);
    } else {
      r.frame_index = item->frame_index;
      r.failed = true;
      r.error = item->error;
      ++summary.decode_errors;
      spdlog::warn("decode error: {}", item->error);
    }
    r.video_id = stream.manifest().video_id;
    ++summary.frames;
    if (r.blurry) ++summary.blurry;
    if (r.failed) ++summary.failed;
    sink(r);
    if (item->frame) {
      r.detections.clear();
      timings.push_back(std::move(r));
    }
  }
  summary.latency = make_latency_report(timings);
  return summary;
}

LatencyReport make_latency_report(const std::vector<PipelineResult>& results) {
  std::map<std::string, std::vector<double>> samples;
  double total_ms = 0.0;
  for (const auto& r : results) {
    for (const auto& [name, t] : r.stage_latencies) samples[name].push_back(t.accounted());
    if (auto tw = r.accounted_ms(stage::total_wall)) total_ms += *tw;
  }
  LatencyReport report;
  for (auto& [name, v] : samples) {
    std::sort(v.begin(), v.end());
    auto rank = [&](double q) {
      const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
      return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
    };
    StageStats s;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    s.p50 = rank(0.50);
    s.p95 = rank(0.95);
    s.max = v.back();
    report.stages[name] = s;
  }
  report.throughput_fps = total_ms > 0.0 ? 1000.0 * static_cast<double>(results.size()) / total_ms : 0.0;
  return report;
}

nlohmann::ordered_json latency_report_to_json(const LatencyReport& r) {
  nlohmann::ordered_json o;
  o["throughput_fps"] = r.throughput_fps;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& [name, s] : r.stages) {
    stages[name] = {{"count", s.count}, {"mean_ms", s.mean}, {"p50_ms", s.p50},
                    {"p95_ms", s.p95},  {"max_ms", s.max}};
  }
  o["stages"] = stages;
  return o;
}

std::string result_to_json_line(const PipelineResult& r, ResultLatency latency) {
  nlohmann::ordered_json j;
  j["video_id"] = r.video_id;
  j["frame_index"] = r.frame_index;
  j["blurry"] = r.blurry;
  j["failed"] = r.failed;
  if (r.failed) j["error"] = r.error;
  j["detections"] = nlohmann::ordered_json::array();
  for (const auto& d : r.detections) {
    j["detections"].push_back({{"x", d.box.x},
                               {"y", d.box.y},
                               {"w", d.box.w},
                               {"h", d.box.h},
                               {"score", d.score},
                               {"source", std::string(to_string(d.source))},
                               {"label", std::string(to_string(d.label))}});
  }
  nlohmann::ordered_json lat = nlohmann::ordered_json::object();
  for (const char* name :
       {stage::gate, stage::detector_a, stage::detector_b, stage::ensemble, stage::total_wall}) {
    auto it = r.stage_latencies.find(name);
    if (it == r.stage_latencies.end()) continue;
    lat[name] = latency == ResultLatency::simulated ? it->second.simulated_ms : it->second.accounted();
  }
  j["stage_latencies"] = lat;
  return j.dump();
}

PipelineResult result_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  PipelineResult r;
  r.video_id = j.value("video_id", std::string());
  r.frame_index = j.at("frame_index").get<std::int64_t>();
  r.blurry = j.value("blurry", false);
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string());
  for (const auto& d : j.at("detections")) {
    ScoredBox b;
    b.box = {d.at("x").get<int>(), d.at("y").get<int>(), d.at("w").get<int>(), d.at("h").get<int>()};
    if (!b.box.valid()) throw std::invalid_argument("detection box has w or h < 1 or negative origin");
    b.score = d.at("score").get<double>();
    b.source = source_from_string(d.value("source", std::string("ensemble")));
    b.label = label_from_string(d.value("label", std::string("polyp")));
    r.detections.push_back(b);
  }
  if (auto it = j.find("stage_latencies"); it != j.end()) {
    for (const auto& [name, v] : it->items()) r.stage_latencies[name] = {v.get<double>(), 0.0};
  }
  return r;
}

}  // namespace scopeline
