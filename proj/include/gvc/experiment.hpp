#pragma once

// Experiment configuration (YAML) and the run / compare / sweep drivers used
// by the gvcsim CLI. Everything that affects results lives in the config; the
// environment only overrides the output directory and log verbosity.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "gvc/controller.hpp"
#include "gvc/error.hpp"
#include "gvc/metrics.hpp"
#include "gvc/pipeline.hpp"
#include "gvc/trace.hpp"

namespace gvc {

namespace fs = std::filesystem;

enum class ExitCode : int { Ok = 0, ConfigError = 2, RuntimeError = 3 };

struct TraceSource {
  enum class Kind { Synth, File };
  Kind kind{Kind::Synth};
  BandName band{BandName::Medium};
  double duration{300.0};
  double step{1.0};
  std::string path;  // resolved against the config file's directory

  bool operator==(const TraceSource&) const = default;
};

struct ExperimentConfig {
  std::vector<QualityLevel> levels = default_levels();
  ControllerConfig params;
  std::vector<ControllerSpec> controllers{
      {ControllerKind::Proposed, 1, {}},
      {ControllerKind::BB, 1, {}},
      {ControllerKind::FBR, 1, {}},
  };
  TraceSource trace;
  int num_chunks{120};
  int repetitions{20};
  std::uint64_t seed_base{1};
  std::vector<BandName> bands{BandName::Low, BandName::Medium, BandName::High};
  std::optional<PredictiveConfig> predictive;
  std::string output_dir{"out"};
  std::string log_level{"info"};

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    validate_levels(levels);
    params.validate();
    if (controllers.empty()) throw ConfigError("controllers: at least one controller is required");
    for (std::size_t i = 0; i < controllers.size(); ++i) {
      const auto& c = controllers[i];
      try {
        if (c.kind == ControllerKind::FBR) fbr_select(c.fixed_level, levels);
        if (c.kind == ControllerKind::BB) c.bb.validate(params.buffer_max);
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("controllers[{}]: {}", i, e.what()));
      }
    }
    std::set<std::string> labels;
    for (const auto& c : controllers) {
      if (!labels.insert(c.label()).second) throw ConfigError(fmt::format("controllers: duplicate '{}'", c.label()));
    }
    if (num_chunks < 1) throw ConfigError("session.chunks: must be >= 1");
    if (repetitions < 1) throw ConfigError("experiment.repetitions: must be >= 1");
    if (trace.kind == TraceSource::Kind::Synth) {
      if (!(trace.duration > 0.0)) throw ConfigError("trace.duration: must be positive");
      if (!(trace.step > 0.0)) throw ConfigError("trace.step: must be positive");
      if (num_chunks * params.chunk_duration > trace.duration) {
        throw ConfigError(fmt::format("trace.duration: {} s is shorter than {} chunks of {} s", trace.duration,
                                      num_chunks, params.chunk_duration));
      }
    } else if (!fs::exists(trace.path)) {
      throw ConfigError(fmt::format("trace.path: file '{}' does not exist", trace.path));
    }
    if (predictive) predictive->validate();
    if (log_level != "quiet" && log_level != "info" && log_level != "debug") {
      throw ConfigError(fmt::format("output.log_level: '{}' is not one of quiet, info, debug", log_level));
    }
  }
};

namespace detail {

// Rejects keys outside `allowed` so typos surface as schema errors.
inline void check_keys(const YAML::Node& node, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError(fmt::format("{}: expected a mapping", section));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("{}.{}: unknown key", section, key));
    }
  }
}

template <typename T>
void read(const YAML::Node& node, std::string_view key, std::string_view section, T& out) {
  const auto child = node[std::string(key)];
  if (!child) return;
  try {
    out = child.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{}.{}: invalid value '{}'", section, key, YAML::Dump(child)));
  }
}

inline std::string num(double v) { return fmt::format("{}", v); }

}  // namespace detail

// Parses YAML text; relative trace paths resolve against base_dir.
inline ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("config: YAML syntax error: {}", e.what()));
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) return cfg;
  detail::check_keys(root, "config",
                     {"session", "proposed", "levels", "controllers", "trace", "predictive", "experiment", "output"});

  if (auto s = root["session"]) {
    detail::check_keys(s, "session", {"chunks", "chunk_duration", "buffer_max"});
    detail::read(s, "chunks", "session", cfg.num_chunks);
    detail::read(s, "chunk_duration", "session", cfg.params.chunk_duration);
    detail::read(s, "buffer_max", "session", cfg.params.buffer_max);
  }
  if (auto p = root["proposed"]) {
    detail::check_keys(p, "proposed", {"gamma", "beta", "lambda_init"});
    detail::read(p, "gamma", "proposed", cfg.params.gamma);
    detail::read(p, "beta", "proposed", cfg.params.beta);
    detail::read(p, "lambda_init", "proposed", cfg.params.lambda_init);
  }
  if (auto levels = root["levels"]) {
    if (!levels.IsSequence()) throw ConfigError("levels: expected a list");
    cfg.levels.clear();
    int index = 1;
    for (const auto& l : levels) {
      const auto section = fmt::format("levels[{}]", index - 1);
      detail::check_keys(l, section, {"quality", "gen_delay", "bitrate"});
      QualityLevel level{index++, 0.0, 0.0, 0.0};
      if (!l["quality"] || !l["gen_delay"] || !l["bitrate"]) {
        throw ConfigError(fmt::format("{}: quality, gen_delay and bitrate are required", section));
      }
      detail::read(l, "quality", section, level.quality);
      detail::read(l, "gen_delay", section, level.gen_delay);
      detail::read(l, "bitrate", section, level.bitrate_mbps);
      cfg.levels.push_back(level);
    }
  }
  if (auto cs = root["controllers"]) {
    if (!cs.IsSequence()) throw ConfigError("controllers: expected a list");
    cfg.controllers.clear();
    std::size_t i = 0;
    for (const auto& c : cs) {
      const auto section = fmt::format("controllers[{}]", i++);
      detail::check_keys(c, section, {"type", "level", "reservoir", "cushion"});
      if (!c["type"]) throw ConfigError(fmt::format("{}.type: required", section));
      ControllerSpec spec;
      try {
        spec.kind = controller_kind_from_string(c["type"].as<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}.type: {}", section, e.what()));
      }
      detail::read(c, "level", section, spec.fixed_level);
      detail::read(c, "reservoir", section, spec.bb.reservoir);
      detail::read(c, "cushion", section, spec.bb.cushion);
      cfg.controllers.push_back(spec);
    }
  }
  if (auto t = root["trace"]) {
    detail::check_keys(t, "trace", {"source", "band", "duration", "step", "path"});
    std::string source = "synth";
    detail::read(t, "source", "trace", source);
    if (source == "synth") {
      cfg.trace.kind = TraceSource::Kind::Synth;
    } else if (source == "file") {
      cfg.trace.kind = TraceSource::Kind::File;
    } else {
      throw ConfigError(fmt::format("trace.source: '{}' is not synth or file", source));
    }
    if (t["band"]) cfg.trace.band = band_from_string(t["band"].as<std::string>());
    detail::read(t, "duration", "trace", cfg.trace.duration);
    detail::read(t, "step", "trace", cfg.trace.step);
    detail::read(t, "path", "trace", cfg.trace.path);
    if (cfg.trace.kind == TraceSource::Kind::File) {
      if (cfg.trace.path.empty()) throw ConfigError("trace.path: required when source is file");
      fs::path p(cfg.trace.path);
      if (p.is_relative() && !base_dir.empty()) cfg.trace.path = (base_dir / p).lexically_normal().string();
    }
  }
  if (auto pr = root["predictive"]) {
    if (!pr.IsNull()) {
      detail::check_keys(pr, "predictive", {"horizon", "hit_prob"});
      PredictiveConfig pc;
      detail::read(pr, "horizon", "predictive", pc.horizon);
      detail::read(pr, "hit_prob", "predictive", pc.hit_prob);
      cfg.predictive = pc;
    }
  }
  if (auto e = root["experiment"]) {
    detail::check_keys(e, "experiment", {"repetitions", "seed", "bands"});
    detail::read(e, "repetitions", "experiment", cfg.repetitions);
    detail::read(e, "seed", "experiment", cfg.seed_base);
    if (auto bands = e["bands"]) {
      if (!bands.IsSequence()) throw ConfigError("experiment.bands: expected a list");
      cfg.bands.clear();
      for (const auto& b : bands) cfg.bands.push_back(band_from_string(b.as<std::string>()));
      if (cfg.bands.empty()) throw ConfigError("experiment.bands: list is empty");
    }
  }
  if (auto o = root["output"]) {
    detail::check_keys(o, "output", {"dir", "log_level"});
    detail::read(o, "dir", "output", cfg.output_dir);
    detail::read(o, "log_level", "output", cfg.log_level);
  }
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

// Normalised YAML for --print-config; parse_config(print_config(c)) == c.
inline std::string print_config(const ExperimentConfig& cfg) {
  using detail::num;
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "session" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "chunks" << YAML::Value << cfg.num_chunks;
  out << YAML::Key << "chunk_duration" << YAML::Value << num(cfg.params.chunk_duration);
  out << YAML::Key << "buffer_max" << YAML::Value << num(cfg.params.buffer_max);
  out << YAML::EndMap;

  out << YAML::Key << "proposed" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "gamma" << YAML::Value << num(cfg.params.gamma);
  out << YAML::Key << "beta" << YAML::Value << num(cfg.params.beta);
  out << YAML::Key << "lambda_init" << YAML::Value << num(cfg.params.lambda_init);
  out << YAML::EndMap;

  out << YAML::Key << "levels" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : cfg.levels) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "quality" << YAML::Value << num(l.quality);
    out << YAML::Key << "gen_delay" << YAML::Value << num(l.gen_delay);
    out << YAML::Key << "bitrate" << YAML::Value << num(l.bitrate_mbps);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "controllers" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : cfg.controllers) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << std::string(to_string(c.kind));
    if (c.kind == ControllerKind::FBR) out << YAML::Key << "level" << YAML::Value << c.fixed_level;
    if (c.kind == ControllerKind::BB) {
      out << YAML::Key << "reservoir" << YAML::Value << num(c.bb.reservoir);
      out << YAML::Key << "cushion" << YAML::Value << num(c.bb.cushion);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "trace" << YAML::Value << YAML::BeginMap;
  if (cfg.trace.kind == TraceSource::Kind::Synth) {
    out << YAML::Key << "source" << YAML::Value << "synth";
    out << YAML::Key << "band" << YAML::Value << std::string(to_string(cfg.trace.band));
    out << YAML::Key << "duration" << YAML::Value << num(cfg.trace.duration);
    out << YAML::Key << "step" << YAML::Value << num(cfg.trace.step);
  } else {
    out << YAML::Key << "source" << YAML::Value << "file";
    out << YAML::Key << "path" << YAML::Value << cfg.trace.path;
  }
  out << YAML::EndMap;

  if (cfg.predictive) {
    out << YAML::Key << "predictive" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "horizon" << YAML::Value << num(cfg.predictive->horizon);
    out << YAML::Key << "hit_prob" << YAML::Value << num(cfg.predictive->hit_prob);
    out << YAML::EndMap;
  }

  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "repetitions" << YAML::Value << cfg.repetitions;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed_base;
  out << YAML::Key << "bands" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto b : cfg.bands) out << std::string(to_string(b));
  out << YAML::EndSeq;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << cfg.output_dir;
  out << YAML::Key << "log_level" << YAML::Value << cfg.log_level;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// Writes to a temporary sibling and renames it over the target.
inline void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error(fmt::format("short write to '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

// Runs fn(0..n-1) on a small worker pool. fn must only touch its own slot.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct SessionResult {
  SessionLog log;
  SessionMetrics metrics;
};

// Seed for repetition r; every controller in a comparison uses the same one.
inline std::uint64_t repetition_seed(const ExperimentConfig& cfg, int r) {
  return cfg.seed_base + static_cast<std::uint64_t>(r);
}

inline ThroughputTrace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("trace.path: cannot read '{}'", path));
  return parse_trace(in);
}

inline SessionResult run_repetition(const ExperimentConfig& cfg, const ControllerSpec& controller, BandName band,
                                    int r, const ThroughputTrace* file_trace = nullptr) {
  SessionConfig sc;
  sc.levels = cfg.levels;
  sc.controller = controller;
  sc.params = cfg.params;
  sc.num_chunks = cfg.num_chunks;
  sc.seed = repetition_seed(cfg, r);
  sc.predictive = cfg.predictive;
  std::optional<BandName> label;
  if (file_trace != nullptr) {
    sc.trace = *file_trace;
    label = classify_band(sc.trace);
  } else {
    sc.trace = synth_trace(band, cfg.trace.duration, sc.seed, cfg.trace.step);
    label = band;
  }
  SessionResult res;
  res.log = run_session(sc);
  res.metrics.band = label;
  if (!res.log.records.empty()) {
    res.metrics = compute_metrics(res.log, cfg.params.lambda_init, cfg.params.gamma, label);
  }
  return res;
}

struct AggregateRow {
  std::string controller;
  std::optional<BandName> band;
  double avq{0.0};
  double rr_percent{0.0};
  double objective{0.0};
  int repetitions{0};
};

struct CommandResult {
  ExitCode exit_code{ExitCode::Ok};
  std::string diagnostic;
  std::vector<AggregateRow> rows;
};

namespace detail {

inline AggregateRow aggregate(std::string controller, const std::vector<SessionResult>& runs) {
  AggregateRow row;
  row.controller = std::move(controller);
  row.band = runs.front().metrics.band;
  for (const auto& r : runs) {
    row.avq += r.metrics.avq;
    row.rr_percent += r.metrics.rr_percent;
    row.objective += r.metrics.objective;
  }
  const double n = static_cast<double>(runs.size());
  row.avq /= n;
  row.rr_percent /= n;
  row.objective /= n;
  row.repetitions = static_cast<int>(runs.size());
  return row;
}

inline std::string summary_csv(const std::vector<AggregateRow>& rows) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& r : rows) out += summary_row(r.controller, r.band, r.avq, r.rr_percent, r.objective);
  return out;
}

inline void note_exhaustion(CommandResult& result, const std::string& id, const SessionLog& log) {
  if (log.status != SessionStatus::TraceExhausted) return;
  result.exit_code = ExitCode::RuntimeError;
  if (!result.diagnostic.empty()) result.diagnostic += '\n';
  result.diagnostic += fmt::format("session {}: trace exhausted ({})", id, log.status_detail);
}

// Runs controllers x repetitions, in parallel, keeping results in order.
inline std::vector<std::vector<SessionResult>> run_grid(const ExperimentConfig& cfg,
                                                        const std::vector<ControllerSpec>& controllers, BandName band) {
  std::optional<ThroughputTrace> file_trace;
  if (cfg.trace.kind == TraceSource::Kind::File) file_trace = load_trace_file(cfg.trace.path);
  const auto reps = static_cast<std::size_t>(cfg.repetitions);
  std::vector<std::vector<SessionResult>> grid(controllers.size(), std::vector<SessionResult>(reps));
  parallel_for(controllers.size() * reps, [&](std::size_t job) {
    const auto c = job / reps;
    const auto r = job % reps;
    grid[c][r] = run_repetition(cfg, controllers[c], band, static_cast<int>(r), file_trace ? &*file_trace : nullptr);
  });
  return grid;
}

}  // namespace detail

// Every configured controller x repetition: per-session JSON and CSV logs plus
// one summary row per session.
inline CommandResult cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  CommandResult result;
  const auto grid = detail::run_grid(cfg, cfg.controllers, cfg.trace.band);
  std::string summary(kSummaryHeader);
  summary += '\n';
  for (std::size_t c = 0; c < grid.size(); ++c) {
    for (std::size_t r = 0; r < grid[c].size(); ++r) {
      const auto& res = grid[c][r];
      const auto id = fmt::format("{}_r{}", cfg.controllers[c].label(), r);
      detail::note_exhaustion(result, id, res.log);
      if (res.log.records.empty()) continue;
      auto j = to_json(res.log);
      j["metrics"] = to_json(res.metrics);
      write_file_atomic(out_dir / fmt::format("session_{}.json", id), j.dump(2) + "\n");
      write_file_atomic(out_dir / fmt::format("chunks_{}.csv", id), chunks_csv(res.log));
      summary += summary_row(res.log.controller, res.metrics.band, res.metrics.avq, res.metrics.rr_percent,
                             res.metrics.objective);
      result.rows.push_back({res.log.controller, res.metrics.band, res.metrics.avq, res.metrics.rr_percent,
                             res.metrics.objective, 1});
    }
  }
  write_file_atomic(out_dir / "summary.csv", summary);
  return result;
}

// All controllers on identical traces and seeds; one averaged row each.
inline CommandResult cmd_compare(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  if (cfg.controllers.size() < 2) {
    throw ConfigError("compare: at least two controllers must be configured");
  }
  CommandResult result;
  const auto grid = detail::run_grid(cfg, cfg.controllers, cfg.trace.band);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    for (std::size_t r = 0; r < grid[c].size(); ++r) {
      detail::note_exhaustion(result, fmt::format("{}_r{}", cfg.controllers[c].label(), r), grid[c][r].log);
    }
    result.rows.push_back(detail::aggregate(cfg.controllers[c].label(), grid[c]));
  }
  write_file_atomic(out_dir / "summary.csv", detail::summary_csv(result.rows));
  return result;
}

// The Lagrangian controller across synthetic bands, one averaged row per band.
inline CommandResult cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  if (cfg.trace.kind != TraceSource::Kind::Synth) throw ConfigError("trace.source: sweep requires synthetic traces");
  if (cfg.bands.empty()) throw ConfigError("experiment.bands: list is empty");
  const ControllerSpec proposed{ControllerKind::Proposed, 1, {}};
  CommandResult result;
  for (auto band : cfg.bands) {
    const auto grid = detail::run_grid(cfg, {proposed}, band);
    for (std::size_t r = 0; r < grid[0].size(); ++r) {
      detail::note_exhaustion(result, fmt::format("{}_{}_r{}", proposed.label(), to_string(band), r), grid[0][r].log);
    }
    result.rows.push_back(detail::aggregate(proposed.label(), grid[0]));
  }
  write_file_atomic(out_dir / "summary.csv", detail::summary_csv(result.rows));

  std::string plot = "band_index,band,band_min_mbps,band_max_mbps,avq,rr_percent\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& b = band(cfg.bands[i]);
    plot += fmt::format("{},{},{},{},{:.6f},{:.6f}\n", i, to_string(b.name), b.min_mbps, b.max_mbps,
                        result.rows[i].avq, result.rows[i].rr_percent);
  }
  write_file_atomic(out_dir / "sweep_plot.csv", plot);
  return result;
}

}  // namespace gvc
