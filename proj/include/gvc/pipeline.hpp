#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gvc/controller.hpp"
#include "gvc/error.hpp"
#include "gvc/trace.hpp"

namespace gvc {

// Seconds needed to deliver `megabits` starting at `start`, integrating the
// zero-order-hold bandwidth exactly segment by segment.
inline double transmission_time(const ThroughputTrace& trace, double start, double megabits) {
  if (!std::isfinite(megabits) || megabits < 0.0) {
    throw ConfigError(fmt::format("transmission_time: invalid size {} Mbit", megabits));
  }
  if (!std::isfinite(start) || start < 0.0 || start > trace.duration()) {
    throw TraceExhausted(megabits, fmt::format("transmission starts at {} s, outside trace [0, {}] s",
                                               start, trace.duration()));
  }
  if (megabits == 0.0) return 0.0;

  const auto& samples = trace.samples();
  std::size_t i = trace.segment_at(start);
  double now = start;
  double remaining = megabits;
  while (i < samples.size()) {
    const double end = trace.segment_end(i);
    const double bw = samples[i].bandwidth_mbps;
    if (bw > 0.0) {
      const double capacity = bw * (end - now);
      if (capacity >= remaining) return now + remaining / bw - start;
      remaining -= capacity;
    }
    now = end;
    ++i;
  }
  throw TraceExhausted(remaining, fmt::format("trace exhausted at {} s with {} Mbit undelivered",
                                              trace.duration(), remaining));
}

// Predictive pre-generation: a correct behaviour prediction (probability
// hit_prob) lets generation start `horizon` seconds early.
struct PredictiveConfig {
  double horizon{0.0};   // seconds
  double hit_prob{0.0};  // [0, 1]

  void validate() const {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
      throw ConfigError(fmt::format("predictive.horizon: must be non-negative, got {}", horizon));
    }
    if (!(hit_prob >= 0.0 && hit_prob <= 1.0)) {
      throw ConfigError(fmt::format("predictive.hit_prob: must lie in [0, 1], got {}", hit_prob));
    }
  }

  bool operator==(const PredictiveConfig&) const = default;
};

struct EffectiveDelay {
  double seconds{0.0};
  std::optional<bool> hit;
};

// `draw` is a uniform [0,1) variate; the caller draws it every chunk so that
// all controllers consume identical random streams.
inline EffectiveDelay effective_generation_delay(const QualityLevel& level,
                                                 const std::optional<PredictiveConfig>& predictive, double draw) {
  if (!predictive) return {level.gen_delay, std::nullopt};
  const bool hit = draw < predictive->hit_prob;
  if (!hit) return {level.gen_delay, false};
  return {std::max(0.0, level.gen_delay - predictive->horizon), true};
}

struct SessionConfig {
  std::vector<QualityLevel> levels = default_levels();
  ControllerSpec controller;
  ControllerConfig params;
  ThroughputTrace trace;
  int num_chunks{1};
  std::uint64_t seed{0};
  std::optional<PredictiveConfig> predictive;

  void validate() const {
    validate_levels(levels);
    params.validate();
    if (controller.kind == ControllerKind::FBR) fbr_select(controller.fixed_level, levels);
    if (controller.kind == ControllerKind::BB) controller.bb.validate(params.buffer_max);
    if (num_chunks < 1) throw ConfigError(fmt::format("session.chunks: must be >= 1, got {}", num_chunks));
    if (trace.size() == 0) throw ConfigError("session.trace: trace is empty");
    if (num_chunks * params.chunk_duration > trace.duration()) {
      throw ConfigError(fmt::format("session.chunks: {} chunks of {} s exceed trace duration {} s", num_chunks,
                                    params.chunk_duration, trace.duration()));
    }
    if (predictive) predictive->validate();
  }
};

struct ChunkRecord {
  int k{0};                     // 1-based chunk index
  double t{0.0};                // decision time, s
  double dt{0.0};               // elapsed since previous decision (playback cadence), s
  int level{1};
  double quality{0.0};
  double gen_delay{0.0};        // d_i of the chosen level
  double effective_gen_delay{0.0};
  double tx_delay{0.0};
  double total_delay{0.0};      // effective_gen_delay + tx_delay
  double buffer{0.0};           // B(t_k) after the update, seen by the controller
  double lambda{0.0};           // multiplier after this decision
  double rebuffer{0.0};
  std::optional<bool> prediction_hit;

  bool operator==(const ChunkRecord&) const = default;
};

enum class SessionStatus { Complete, TraceExhausted };

inline std::string_view to_string(SessionStatus s) {
  return s == SessionStatus::Complete ? "complete" : "trace_exhausted";
}

struct SessionLog {
  std::string controller;  // ControllerSpec::label()
  std::string config_digest;
  std::uint64_t seed{0};
  int num_levels{0};
  double chunk_duration{1.0};
  double buffer_max{0.0};
  bool predictive_synthetic{false};
  std::vector<ChunkRecord> records;
  double wall_clock{0.0};  // s, excludes startup
  double total_rebuffer{0.0};
  SessionStatus status{SessionStatus::Complete};
  std::string status_detail;

  bool operator==(const SessionLog&) const = default;
};

namespace detail {

// FNV-1a, stable across platforms and runs.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace detail

inline nlohmann::json to_json(const SessionConfig& cfg) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : cfg.levels) {
    levels.push_back({{"index", l.index}, {"quality", l.quality}, {"gen_delay", l.gen_delay}, {"bitrate", l.bitrate_mbps}});
  }
  nlohmann::json j{
      {"levels", std::move(levels)},
      {"controller", {{"type", to_string(cfg.controller.kind)},
                      {"fixed_level", cfg.controller.fixed_level},
                      {"reservoir", cfg.controller.bb.reservoir},
                      {"cushion", cfg.controller.bb.cushion}}},
      {"params", {{"gamma", cfg.params.gamma},
                  {"beta", cfg.params.beta},
                  {"lambda_init", cfg.params.lambda_init},
                  {"buffer_max", cfg.params.buffer_max},
                  {"chunk_duration", cfg.params.chunk_duration}}},
      {"trace", to_json(cfg.trace)},
      {"num_chunks", cfg.num_chunks},
      {"seed", cfg.seed},
  };
  if (cfg.predictive) {
    j["predictive"] = {{"horizon", cfg.predictive->horizon}, {"hit_prob", cfg.predictive->hit_prob}};
  } else {
    j["predictive"] = nullptr;
  }
  return j;
}

inline std::string config_digest(const SessionConfig& cfg) { return detail::fnv1a_hex(to_json(cfg).dump()); }

// Runs one session. Decisions follow the playback cadence (dt = T_chunk); the
// buffer pays the previous chunk's total delay (generation + transmission),
// with zero delay before the first chunk. Transmission starts when generation
// finishes. If the trace runs out the log is truncated and flagged.
inline SessionLog run_session(const SessionConfig& cfg) {
  cfg.validate();

  Controller controller(cfg.controller, cfg.params, cfg.levels);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SessionLog log;
  log.controller = cfg.controller.label();
  log.config_digest = config_digest(cfg);
  log.seed = cfg.seed;
  log.num_levels = static_cast<int>(cfg.levels.size());
  log.chunk_duration = cfg.params.chunk_duration;
  log.buffer_max = cfg.params.buffer_max;
  log.predictive_synthetic = cfg.predictive.has_value();
  log.records.reserve(static_cast<std::size_t>(cfg.num_chunks));

  const double chunk = cfg.params.chunk_duration;
  double t = 0.0;
  double delay_prev = 0.0;

  for (int k = 1; k <= cfg.num_chunks; ++k) {
    const auto decision = controller.step(chunk, delay_prev, t);
    // Stalls push this decision later in wall-clock time.
    if (k > 1) t += decision.rebuffer;

    const auto& level = cfg.levels[static_cast<std::size_t>(decision.level - 1)];
    const auto eff = effective_generation_delay(level, cfg.predictive, unit(rng));

    ChunkRecord rec;
    rec.k = k;
    rec.t = t;
    rec.dt = chunk;
    rec.level = decision.level;
    rec.quality = level.quality;
    rec.gen_delay = level.gen_delay;
    rec.effective_gen_delay = eff.seconds;
    rec.buffer = decision.buffer;
    rec.lambda = decision.lambda;
    rec.rebuffer = decision.rebuffer;
    rec.prediction_hit = eff.hit;

    try {
      rec.tx_delay = transmission_time(cfg.trace, t + eff.seconds, level.bitrate_mbps * chunk);
    } catch (const TraceExhausted& e) {
      log.status = SessionStatus::TraceExhausted;
      log.status_detail = fmt::format("chunk {}: {}", k, e.what());
      break;
    }
    rec.total_delay = rec.effective_gen_delay + rec.tx_delay;
    log.total_rebuffer += rec.rebuffer;
    log.records.push_back(rec);

    delay_prev = rec.total_delay;
    t += chunk;
  }
  log.wall_clock = static_cast<double>(log.records.size()) * chunk + log.total_rebuffer;
  return log;
}

inline nlohmann::json to_json(const ChunkRecord& r) {
  nlohmann::json j{
      {"k", r.k},
      {"t", r.t},
      {"dt", r.dt},
      {"level", r.level},
      {"quality", r.quality},
      {"gen_delay", r.gen_delay},
      {"effective_gen_delay", r.effective_gen_delay},
      {"tx_delay", r.tx_delay},
      {"total_delay", r.total_delay},
      {"buffer", r.buffer},
      {"lambda", r.lambda},
      {"rebuffer", r.rebuffer},
  };
  j["prediction_hit"] = r.prediction_hit ? nlohmann::json(*r.prediction_hit) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const SessionLog& log) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : log.records) records.push_back(to_json(r));
  return {
      {"controller", log.controller},
      {"config_digest", log.config_digest},
      {"seed", log.seed},
      {"num_levels", log.num_levels},
      {"chunk_duration", log.chunk_duration},
      {"buffer_max", log.buffer_max},
      {"predictive_synthetic", log.predictive_synthetic},
      {"status", to_string(log.status)},
      {"status_detail", log.status_detail},
      {"totals", {{"wall_clock", log.wall_clock}, {"total_rebuffer", log.total_rebuffer}}},
      {"records", std::move(records)},
  };
}

inline SessionLog session_log_from_json(const nlohmann::json& j) {
  SessionLog log;
  log.controller = j.at("controller").get<std::string>();
  log.config_digest = j.at("config_digest").get<std::string>();
  log.seed = j.at("seed").get<std::uint64_t>();
  log.num_levels = j.at("num_levels").get<int>();
  log.chunk_duration = j.at("chunk_duration").get<double>();
  log.buffer_max = j.at("buffer_max").get<double>();
  log.predictive_synthetic = j.at("predictive_synthetic").get<bool>();
  log.status = j.at("status").get<std::string>() == "complete" ? SessionStatus::Complete : SessionStatus::TraceExhausted;
  log.status_detail = j.at("status_detail").get<std::string>();
  log.wall_clock = j.at("totals").at("wall_clock").get<double>();
  log.total_rebuffer = j.at("totals").at("total_rebuffer").get<double>();
  for (const auto& rj : j.at("records")) {
    ChunkRecord r;
    r.k = rj.at("k").get<int>();
    r.t = rj.at("t").get<double>();
    r.dt = rj.at("dt").get<double>();
    r.level = rj.at("level").get<int>();
    r.quality = rj.at("quality").get<double>();
    r.gen_delay = rj.at("gen_delay").get<double>();
    r.effective_gen_delay = rj.at("effective_gen_delay").get<double>();
    r.tx_delay = rj.at("tx_delay").get<double>();
    r.total_delay = rj.at("total_delay").get<double>();
    r.buffer = rj.at("buffer").get<double>();
    r.lambda = rj.at("lambda").get<double>();
    r.rebuffer = rj.at("rebuffer").get<double>();
    if (!rj.at("prediction_hit").is_null()) r.prediction_hit = rj.at("prediction_hit").get<bool>();
    log.records.push_back(r);
  }
  return log;
}

inline constexpr std::string_view kChunkCsvHeader =
    "k,t,dt,level,quality,gen_delay,effective_gen_delay,tx_delay,total_delay,buffer,lambda,rebuffer,prediction_hit";

inline std::string chunks_csv(const SessionLog& log) {
  std::string out(kChunkCsvHeader);
  out += '\n';
  for (const auto& r : log.records) {
    const char* hit = r.prediction_hit ? (*r.prediction_hit ? "1" : "0") : "";
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.k, r.t, r.dt, r.level, r.quality, r.gen_delay,
                       r.effective_gen_delay, r.tx_delay, r.total_delay, r.buffer, r.lambda, r.rebuffer, hit);
  }
  return out;
}

}  // namespace gvc
