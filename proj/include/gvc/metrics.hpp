#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gvc/controller.hpp"
#include "gvc/error.hpp"
#include "gvc/pipeline.hpp"
#include "gvc/trace.hpp"

namespace gvc {

struct SessionMetrics {
  double avq{0.0};
  double rr_percent{0.0};
  double objective{0.0};
  std::optional<BandName> band;
};

namespace detail {
inline void require_records(const SessionLog& log, std::string_view what) {
  if (log.records.empty()) throw std::invalid_argument(fmt::format("{}: session log has no chunks", what));
}
}  // namespace detail

// Average video quality: mean selected level index.
inline double avq(const SessionLog& log) {
  detail::require_records(log, "avq");
  double sum = 0.0;
  for (const auto& r : log.records) sum += r.level;
  return sum / static_cast<double>(log.records.size());
}

// Percentage of wall-clock session time spent stalled.
inline double rebuffer_ratio(const SessionLog& log) {
  detail::require_records(log, "rebuffer_ratio");
  double stalled = 0.0;
  for (const auto& r : log.records) stalled += r.rebuffer;
  if (stalled == 0.0) return 0.0;
  return 100.0 * stalled / log.wall_clock;
}

// sum_k q_k - lambda * d_k / max(B_k, floor)^gamma with a fixed lambda and the
// buffer each decision saw.
inline double objective_value(const SessionLog& log, double lambda, double gamma) {
  detail::require_records(log, "objective_value");
  double total = 0.0;
  for (const auto& r : log.records) {
    const double b = std::max(r.buffer, kBufferFloor);
    total += r.quality - lambda * r.gen_delay / std::pow(b, gamma);
  }
  return total;
}

inline SessionMetrics compute_metrics(const SessionLog& log, double lambda, double gamma,
                                      std::optional<BandName> band = std::nullopt) {
  return {avq(log), rebuffer_ratio(log), objective_value(log, lambda, gamma), band};
}

inline nlohmann::json to_json(const SessionMetrics& m) {
  return {{"avq", m.avq},
          {"rr_percent", m.rr_percent},
          {"objective", m.objective},
          {"band", m.band ? nlohmann::json(std::string(to_string(*m.band))) : nlohmann::json(nullptr)}};
}

inline constexpr std::string_view kSummaryHeader = "controller,band,avq,rr_percent,objective";

inline std::string summary_row(std::string_view controller, std::optional<BandName> band, double avq_value,
                               double rr_value, double objective) {
  return fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", controller, band ? to_string(*band) : "unclassified", avq_value,
                     rr_value, objective);
}

}  // namespace gvc
