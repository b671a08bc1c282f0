#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gvc/error.hpp"

namespace gvc {

struct TraceSample {
  double time_s{0.0};
  double bandwidth_mbps{0.0};

  bool operator==(const TraceSample&) const = default;
};

// Piecewise-constant (zero-order hold) throughput trace. Sample i holds from
// its own time until the next sample's time, and the last sample holds until
// duration().
class ThroughputTrace {
 public:
  ThroughputTrace() = default;

  // Duration defaults to the last sample time.
  explicit ThroughputTrace(std::vector<TraceSample> samples, std::optional<double> duration = std::nullopt)
      : samples_(std::move(samples)) {
    if (samples_.empty()) {
      throw TraceError(TraceError::Kind::Empty, 0, "trace has no samples");
    }
    if (samples_.front().time_s != 0.0) {
      throw TraceError(TraceError::Kind::BadStart, 0,
                       fmt::format("trace must start at t=0, first sample is at {}", samples_.front().time_s));
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!std::isfinite(s.time_s) || !std::isfinite(s.bandwidth_mbps)) {
        throw TraceError(TraceError::Kind::MalformedRow, 0, fmt::format("sample {} is not finite", i));
      }
      if (s.bandwidth_mbps < 0.0) {
        throw TraceError(TraceError::Kind::NegativeBandwidth, 0,
                         fmt::format("sample {} has negative bandwidth {}", i, s.bandwidth_mbps));
      }
      if (i > 0 && !(s.time_s > samples_[i - 1].time_s)) {
        throw TraceError(TraceError::Kind::NonMonotoneTime, 0,
                         fmt::format("sample {} time {} does not increase", i, s.time_s));
      }
    }
    duration_ = duration.value_or(samples_.back().time_s);
    if (!std::isfinite(duration_) || duration_ < samples_.back().time_s) {
      throw TraceError(TraceError::Kind::BadDuration, 0,
                       fmt::format("duration {} precedes last sample time {}", duration_, samples_.back().time_s));
    }
  }

  const std::vector<TraceSample>& samples() const noexcept { return samples_; }
  double duration() const noexcept { return duration_; }
  std::size_t size() const noexcept { return samples_.size(); }

  // Index of the sample whose hold interval contains t (t clamped at 0).
  std::size_t segment_at(double t) const {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const TraceSample& s) { return v < s.time_s; });
    return it == samples_.begin() ? 0 : static_cast<std::size_t>(it - samples_.begin()) - 1;
  }

  // End of the hold interval of sample i.
  double segment_end(std::size_t i) const {
    return i + 1 < samples_.size() ? samples_[i + 1].time_s : duration_;
  }

  double bandwidth_at(double t) const { return samples_[segment_at(t)].bandwidth_mbps; }

  // Mean bandwidth weighted by hold time over [0, duration]. A zero-length
  // trace (single sample, duration 0) reports that sample's bandwidth.
  double time_weighted_mean() const {
    if (duration_ <= 0.0) return samples_.front().bandwidth_mbps;
    double area = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      area += samples_[i].bandwidth_mbps * (segment_end(i) - samples_[i].time_s);
    }
    return area / duration_;
  }

  // Returns a copy with every bandwidth multiplied by factor.
  ThroughputTrace scaled(double factor) const {
    auto copy = samples_;
    for (auto& s : copy) s.bandwidth_mbps *= factor;
    return ThroughputTrace(std::move(copy), duration_);
  }

  bool operator==(const ThroughputTrace&) const = default;

 private:
  std::vector<TraceSample> samples_;
  double duration_{0.0};
};

enum class BandName { Low, Medium, High };

struct BandwidthBand {
  BandName name;
  double min_mbps;
  double max_mbps;

  // Half-open: [min, max).
  bool contains(double mbps) const noexcept { return mbps >= min_mbps && mbps < max_mbps; }
  bool operator==(const BandwidthBand&) const = default;
};

inline constexpr std::array<BandwidthBand, 3> kBands{{
    {BandName::Low, 0.5, 1.5},
    {BandName::Medium, 1.5, 3.0},
    {BandName::High, 3.0, 5.0},
}};

inline const BandwidthBand& band(BandName name) { return kBands[static_cast<std::size_t>(name)]; }

inline std::string_view to_string(BandName name) {
  switch (name) {
    case BandName::Low: return "low";
    case BandName::Medium: return "medium";
    case BandName::High: return "high";
  }
  return "?";
}

inline BandName band_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& b : kBands) {
    if (to_string(b.name) == lower) return b.name;
  }
  throw ConfigError(fmt::format("unknown bandwidth band '{}' (expected low, medium or high)", s));
}

// Band containing the time-weighted mean bandwidth, or nullopt (unclassified).
inline std::optional<BandName> classify_band(const ThroughputTrace& trace) {
  if (trace.size() == 0) {
    throw TraceError(TraceError::Kind::Empty, 0, "cannot classify an empty trace");
  }
  const double mean = trace.time_weighted_mean();
  for (const auto& b : kBands) {
    if (b.contains(mean)) return b.name;
  }
  return std::nullopt;
}

// Samples every `step` seconds drawn uniformly from the band's range.
inline ThroughputTrace synth_trace(BandName name, double duration, std::uint64_t seed, double step = 1.0) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError(fmt::format("synthetic trace duration must be positive, got {}", duration));
  }
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ConfigError(fmt::format("synthetic trace step must be positive, got {}", step));
  }
  const auto& b = band(name);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(b.min_mbps, b.max_mbps);
  const auto count = static_cast<std::size_t>(std::ceil(duration / step));
  std::vector<TraceSample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    samples.push_back({static_cast<double>(i) * step, draw(rng)});
  }
  return ThroughputTrace(std::move(samples), duration);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline constexpr std::string_view kTraceHeader = "time_s,bandwidth_mbps";

// Parses the `time_s,bandwidth_mbps` CSV. Lines starting with '#' are
// comments; "# duration_s=<x>" sets the duration explicitly.
inline ThroughputTrace parse_trace(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::optional<double> duration;
  std::vector<TraceSample> samples;

  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      constexpr std::string_view key = "duration_s=";
      auto body = detail::trim(text.substr(1));
      if (body.substr(0, key.size()) == key) {
        duration = detail::parse_double(body.substr(key.size()));
        if (!duration) {
          throw TraceError(TraceError::Kind::BadDuration, lineno,
                           fmt::format("line {}: unparseable duration directive", lineno));
        }
      }
      continue;
    }
    if (!have_header) {
      if (text != kTraceHeader) {
        throw TraceError(TraceError::Kind::BadHeader, lineno,
                         fmt::format("line {}: expected header '{}', got '{}'", lineno, kTraceHeader, text));
      }
      have_header = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
      throw TraceError(TraceError::Kind::MalformedRow, lineno,
                       fmt::format("line {}: expected two comma-separated fields", lineno));
    }
    const auto t = detail::parse_double(text.substr(0, comma));
    const auto bw = detail::parse_double(text.substr(comma + 1));
    if (!t || !bw || !std::isfinite(*t) || !std::isfinite(*bw)) {
      throw TraceError(TraceError::Kind::MalformedRow, lineno, fmt::format("line {}: malformed number", lineno));
    }
    if (*bw < 0.0) {
      throw TraceError(TraceError::Kind::NegativeBandwidth, lineno,
                       fmt::format("line {}: negative bandwidth {}", lineno, *bw));
    }
    if (samples.empty() && *t != 0.0) {
      throw TraceError(TraceError::Kind::BadStart, lineno,
                       fmt::format("line {}: first sample must be at t=0, got {}", lineno, *t));
    }
    if (!samples.empty() && !(*t > samples.back().time_s)) {
      throw TraceError(TraceError::Kind::NonMonotoneTime, lineno,
                       fmt::format("line {}: time {} is not after {}", lineno, *t, samples.back().time_s));
    }
    samples.push_back({*t, *bw});
  }
  if (!have_header) {
    throw TraceError(TraceError::Kind::Empty, 0, "trace file is empty");
  }
  if (samples.empty()) {
    throw TraceError(TraceError::Kind::Empty, 0, "trace file has a header but no samples");
  }
  if (duration && *duration < samples.back().time_s) {
    throw TraceError(TraceError::Kind::BadDuration, 0,
                     fmt::format("duration {} precedes last sample time {}", *duration, samples.back().time_s));
  }
  return ThroughputTrace(std::move(samples), duration);
}

inline ThroughputTrace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

// Shortest round-trip number formatting, so parse(serialize(t)) == t.
inline std::string serialize_trace(const ThroughputTrace& trace) {
  std::string out;
  if (trace.duration() > trace.samples().back().time_s) {
    out += fmt::format("# duration_s={}\n", trace.duration());
  }
  out += kTraceHeader;
  out += '\n';
  for (const auto& s : trace.samples()) {
    out += fmt::format("{},{}\n", s.time_s, s.bandwidth_mbps);
  }
  return out;
}

inline nlohmann::json to_json(const ThroughputTrace& trace) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : trace.samples()) samples.push_back({s.time_s, s.bandwidth_mbps});
  return {{"duration_s", trace.duration()}, {"samples", std::move(samples)}};
}

inline ThroughputTrace trace_from_json(const nlohmann::json& j) {
  std::vector<TraceSample> samples;
  for (const auto& row : j.at("samples")) {
    samples.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
  }
  return ThroughputTrace(std::move(samples), j.at("duration_s").get<double>());
}

}  // namespace gvc
