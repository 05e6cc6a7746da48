#include <fmt/format.h>

#include <set>

#include "scopeline/pipeline.hpp"

namespace scopeline {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ExecutionMode m) {
  return m == ExecutionMode::sequential ? "sequential" : "parallel";
}

ExecutionMode execution_mode_from_string(std::string_view s) {
  if (s == "sequential") return ExecutionMode::sequential;
  if (s == "parallel") return ExecutionMode::parallel;
  throw ConfigError(fmt::format("unknown execution mode '{}' (expected sequential | parallel)", s));
}

void PipelineConfig::validate() const {
  if (gate.kind == GateKind::heuristic && !(gate.threshold >= 0.0)) {
    throw ConfigError(fmt::format("gate threshold {} must be >= 0", gate.threshold));
  }
  if (!(gate.simulated_latency_ms >= 0.0)) throw ConfigError("gate simulated_latency_ms must be >= 0");
  for (const DetectorSpec* d : {&detector_a, &detector_b}) {
    if (d->kind == DetectorSpec::Kind::synthetic) {
      d->synthetic.validate();
    } else if (d->endpoint.transport == ExternalEndpoint::Transport::stdio &&
               d->endpoint.command.empty()) {
      throw ConfigError("external detector needs a non-empty \"command\"");
    } else if (d->endpoint.transport == ExternalEndpoint::Transport::tcp &&
               (d->endpoint.port <= 0 || d->endpoint.port > 65535)) {
      throw ConfigError(fmt::format("external detector port {} invalid", d->endpoint.port));
    }
  }
  ensemble.validate();
  if (fps < 0.0) throw ConfigError(fmt::format("fps {} must be > 0", fps));
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, std::string_view where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(fmt::format("unknown key \"{}\" in {}", k, where));
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

ScoreRange read_range(const json& j, const char* key, ScoreRange def, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return def;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
    throw ConfigError(fmt::format("{}.{} must be [lo, hi]", where, key));
  }
  return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

ExternalEndpoint read_endpoint(const json& j, std::string_view where) {
  ExternalEndpoint e;
  std::string transport = "stdio";
  read_opt(j, "transport", transport, where);
  if (transport == "stdio") {
    e.transport = ExternalEndpoint::Transport::stdio;
  } else if (transport == "tcp") {
    e.transport = ExternalEndpoint::Transport::tcp;
  } else {
    throw ConfigError(fmt::format("{}.transport '{}' (expected stdio | tcp)", where, transport));
  }
  read_opt(j, "command", e.command, where);
  read_opt(j, "host", e.host, where);
  read_opt(j, "port", e.port, where);
  return e;
}

void write_endpoint(ordered_json& o, const ExternalEndpoint& e) {
  if (e.transport == ExternalEndpoint::Transport::stdio) {
    o["transport"] = "stdio";
    o["command"] = e.command;
  } else {
    o["transport"] = "tcp";
    o["host"] = e.host;
    o["port"] = e.port;
  }
}

DetectorSpec read_detector(const json& j, std::string_view where) {
  reject_unknown(j, {"kind", "synthetic", "transport", "command", "host", "port", "simulated_latency_ms"},
                 where);
  DetectorSpec d;
  std::string kind = "synthetic";
  read_opt(j, "kind", kind, where);
  if (kind == "synthetic") {
    d.kind = DetectorSpec::Kind::synthetic;
    if (auto it = j.find("synthetic"); it != j.end()) {
      const std::string sw = std::string(where) + ".synthetic";
      reject_unknown(*it,
                     {"seed", "p_tp", "fp_rate", "jitter_px", "tp_score_range", "fp_score_range",
                      "simulated_latency_ms"},
                     sw);
      auto& s = d.synthetic;
      read_opt(*it, "seed", s.seed, sw);
      read_opt(*it, "p_tp", s.p_tp, sw);
      read_opt(*it, "fp_rate", s.fp_rate, sw);
      read_opt(*it, "jitter_px", s.jitter_px, sw);
      s.tp_score_range = read_range(*it, "tp_score_range", s.tp_score_range, sw);
      s.fp_score_range = read_range(*it, "fp_score_range", s.fp_score_range, sw);
      read_opt(*it, "simulated_latency_ms", s.simulated_latency_ms, sw);
    }
  } else if (kind == "external") {
    d.kind = DetectorSpec::Kind::external;
    d.endpoint = read_endpoint(j, where);
    read_opt(j, "simulated_latency_ms", d.simulated_latency_ms, where);
  } else {
    throw ConfigError(fmt::format("{}.kind '{}' (expected synthetic | external)", where, kind));
  }
  return d;
}

ordered_json write_detector(const DetectorSpec& d) {
  ordered_json o;
  if (d.kind == DetectorSpec::Kind::synthetic) {
    const auto& s = d.synthetic;
    o["kind"] = "synthetic";
    o["synthetic"] = {{"seed", s.seed},
                      {"p_tp", s.p_tp},
                      {"fp_rate", s.fp_rate},
                      {"jitter_px", s.jitter_px},
                      {"tp_score_range", {s.tp_score_range.lo, s.tp_score_range.hi}},
                      {"fp_score_range", {s.fp_score_range.lo, s.fp_score_range.hi}},
                      {"simulated_latency_ms", s.simulated_latency_ms}};
  } else {
    o["kind"] = "external";
    write_endpoint(o, d.endpoint);
    o["simulated_latency_ms"] = d.simulated_latency_ms;
  }
  return o;
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  reject_unknown(j,
                 {"gate", "detector_a", "detector_b", "ensemble", "execution_mode", "fps",
                  "result_latency"},
                 "config");
  PipelineConfig cfg;
  if (auto it = j.find("gate"); it != j.end()) {
    reject_unknown(*it, {"kind", "threshold", "simulated_latency_ms", "transport", "command", "host", "port"},
                   "gate");
    std::string kind = "heuristic";
    read_opt(*it, "kind", kind, "gate");
    if (kind == "heuristic") {
      cfg.gate.kind = GateKind::heuristic;
    } else if (kind == "external") {
      cfg.gate.kind = GateKind::external;
      cfg.gate.endpoint = read_endpoint(*it, "gate");
    } else if (kind == "disabled") {
      cfg.gate.kind = GateKind::disabled;
    } else {
      throw ConfigError(fmt::format("gate.kind '{}' (expected heuristic | external | disabled)", kind));
    }
    read_opt(*it, "threshold", cfg.gate.threshold, "gate");
    read_opt(*it, "simulated_latency_ms", cfg.gate.simulated_latency_ms, "gate");
  }
  if (auto it = j.find("detector_a"); it != j.end()) cfg.detector_a = read_detector(*it, "detector_a");
  if (auto it = j.find("detector_b"); it != j.end()) cfg.detector_b = read_detector(*it, "detector_b");
  if (auto it = j.find("ensemble"); it != j.end()) {
    reject_unknown(*it, {"iou_threshold", "mode", "short_edge_ratio_threshold"}, "ensemble");
    read_opt(*it, "iou_threshold", cfg.ensemble.iou_threshold, "ensemble");
    std::string mode(to_string(cfg.ensemble.mode));
    read_opt(*it, "mode", mode, "ensemble");
    cfg.ensemble.mode = ensemble_mode_from_string(mode);
    read_opt(*it, "short_edge_ratio_threshold", cfg.ensemble.short_edge_ratio_threshold, "ensemble");
  }
  std::string mode(to_string(cfg.mode));
  read_opt(j, "execution_mode", mode, "config");
  cfg.mode = execution_mode_from_string(mode);
  read_opt(j, "fps", cfg.fps, "config");
  std::string latency = "simulated";
  read_opt(j, "result_latency", latency, "config");
  if (latency == "simulated") {
    cfg.result_latency = ResultLatency::simulated;
  } else if (latency == "accounted") {
    cfg.result_latency = ResultLatency::accounted;
  } else {
    throw ConfigError(fmt::format("result_latency '{}' (expected simulated | accounted)", latency));
  }
  cfg.validate();
  return cfg;
}

ordered_json pipeline_config_to_json(const PipelineConfig& cfg) {
  ordered_json o;
  ordered_json gate;
  switch (cfg.gate.kind) {
    case GateKind::heuristic: gate["kind"] = "heuristic"; break;
    case GateKind::external:
      gate["kind"] = "external";
      write_endpoint(gate, cfg.gate.endpoint);
      break;
    case GateKind::disabled: gate["kind"] = "disabled"; break;
  }
  gate["threshold"] = cfg.gate.threshold;
  gate["simulated_latency_ms"] = cfg.gate.simulated_latency_ms;
  o["gate"] = gate;
  o["detector_a"] = write_detector(cfg.detector_a);
  o["detector_b"] = write_detector(cfg.detector_b);
  o["ensemble"] = {{"iou_threshold", cfg.ensemble.iou_threshold},
                   {"mode", std::string(to_string(cfg.ensemble.mode))},
                   {"short_edge_ratio_threshold", cfg.ensemble.short_edge_ratio_threshold}};
  o["execution_mode"] = std::string(to_string(cfg.mode));
  o["fps"] = cfg.fps;
  o["result_latency"] = cfg.result_latency == ResultLatency::simulated ? "simulated" : "accounted";
  return o;
}

}  // namespace scopeline
