#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gvc/error.hpp"

namespace gvc {

// One generator model tier.
struct QualityLevel {
  int index{1};               // 1-based
  double quality{1.0};        // q_i
  double gen_delay{0.1};      // d_i, seconds
  double bitrate_mbps{1.0};

  bool operator==(const QualityLevel&) const = default;
};

// Levels must be indexed 1..N in order with strictly increasing quality.
inline void validate_levels(std::span<const QualityLevel> levels) {
  if (levels.empty()) throw ConfigError("levels: at least one quality level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.index != static_cast<int>(i) + 1) {
      throw ConfigError(fmt::format("levels[{}].index: expected {}, got {}", i, i + 1, l.index));
    }
    if (!std::isfinite(l.quality)) throw ConfigError(fmt::format("levels[{}].quality: not finite", i));
    if (i > 0 && !(l.quality > levels[i - 1].quality)) {
      throw ConfigError(fmt::format("levels[{}].quality: must exceed the previous level's quality", i));
    }
    if (!(l.gen_delay > 0.0) || !std::isfinite(l.gen_delay)) {
      throw ConfigError(fmt::format("levels[{}].gen_delay: must be positive", i));
    }
    if (!(l.bitrate_mbps > 0.0) || !std::isfinite(l.bitrate_mbps)) {
      throw ConfigError(fmt::format("levels[{}].bitrate: must be positive", i));
    }
  }
}

// Default tier table: q_i = i, generation delay and bitrate rising with quality.
inline std::vector<QualityLevel> default_levels() {
  return {
      {1, 1.0, 0.1, 0.5},
      {2, 2.0, 0.3, 1.0},
      {3, 3.0, 0.6, 1.8},
      {4, 4.0, 0.7, 2.0},
      {5, 5.0, 1.0, 3.6},
  };
}

struct ControllerConfig {
  double gamma{1.0};
  double beta{0.05};
  double lambda_init{1.0};
  double buffer_max{4.0};      // seconds
  double chunk_duration{1.0};  // seconds

  void validate() const {
    auto positive = [](double v, std::string_view name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("controller.{}: must be positive, got {}", name, v));
    };
    positive(gamma, "gamma");
    positive(beta, "beta");
    positive(buffer_max, "buffer_max");
    positive(chunk_duration, "chunk_duration");
    if (!(lambda_init >= 0.0) || !std::isfinite(lambda_init)) {
      throw ConfigError(fmt::format("controller.lambda_init: must be non-negative, got {}", lambda_init));
    }
  }

  bool operator==(const ControllerConfig&) const = default;
};

struct BBConfig {
  double reservoir{0.6};  // seconds
  double cushion{0.6};    // seconds

  void validate(double buffer_max) const {
    if (!(reservoir >= 0.0) || !std::isfinite(reservoir)) {
      throw ConfigError(fmt::format("bb.reservoir: must be non-negative, got {}", reservoir));
    }
    if (!(cushion > 0.0) || !std::isfinite(cushion)) {
      throw ConfigError(fmt::format("bb.cushion: must be positive, got {}", cushion));
    }
    if (reservoir + cushion > buffer_max) {
      throw ConfigError(fmt::format("bb.cushion: reservoir + cushion ({}) exceeds buffer_max ({})",
                                    reservoir + cushion, buffer_max));
    }
  }

  bool operator==(const BBConfig&) const = default;
};

struct ControllerState {
  double lambda{0.0};
  double buffer{0.0};  // seconds
  double t_last{0.0};  // seconds
};

// Floor applied to the buffer before it divides the delay penalty.
inline constexpr double kBufferFloor = 0.05;

// q_i - lambda * d_i / max(B, floor)^gamma
inline double level_utility(const QualityLevel& level, double buffer, double lambda, double gamma) {
  const double b = std::max(buffer, kBufferFloor);
  return level.quality - lambda * level.gen_delay / std::pow(b, gamma);
}

// Argmax of level_utility over all levels; exact ties go to the lowest index.
inline int select_quality(std::span<const QualityLevel> levels, double buffer, double lambda, double gamma) {
  if (levels.empty()) throw ConfigError("select_quality: empty level set");
  if (!std::isfinite(lambda) || !std::isfinite(gamma)) throw ConfigError("select_quality: lambda and gamma must be finite");
  if (!std::isfinite(buffer) || buffer < 0.0) throw ConfigError("select_quality: buffer must be finite and non-negative");

  int best = levels.front().index;
  double best_utility = -std::numeric_limits<double>::infinity();
  for (const auto& level : levels) {
    const double u = level_utility(level, buffer, lambda, gamma);
    if (u > best_utility) {
      best_utility = u;
      best = level.index;
    }
  }
  return best;
}

struct BufferStep {
  double buffer{0.0};    // seconds, in [0, buffer_max]
  double rebuffer{0.0};  // stall seconds booked this step
};

// B' = min(B_max, B + dt - d_prev), clamped below at 0 with the deficit booked
// as rebuffering.
inline BufferStep update_buffer(double buffer_prev, double dt, double delay_prev, double buffer_max) {
  if (!std::isfinite(buffer_prev) || !std::isfinite(dt) || !std::isfinite(delay_prev) || !std::isfinite(buffer_max)) {
    throw ConfigError("update_buffer: inputs must be finite");
  }
  if (dt < 0.0) throw ConfigError(fmt::format("update_buffer: negative elapsed time {}", dt));
  if (delay_prev < 0.0) throw ConfigError(fmt::format("update_buffer: negative delay {}", delay_prev));

  const double raw = buffer_prev + dt - delay_prev;
  return {std::min(buffer_max, std::max(0.0, raw)), std::max(0.0, -raw)};
}

// lambda' = max(0, lambda - beta * (B - B_max))
inline double update_lambda(double lambda, double buffer, double buffer_max, double beta) {
  if (!std::isfinite(lambda) || !std::isfinite(buffer) || !std::isfinite(buffer_max) || !std::isfinite(beta)) {
    throw ConfigError("update_lambda: inputs must be finite");
  }
  if (!(beta > 0.0)) throw ConfigError("update_lambda: beta must be positive");
  return std::max(0.0, lambda - beta * (buffer - buffer_max));
}

inline int fbr_select(int fixed_index, std::span<const QualityLevel> levels) {
  if (fixed_index < 1 || fixed_index > static_cast<int>(levels.size())) {
    throw ConfigError(fmt::format("fbr.level: {} is outside 1..{}", fixed_index, levels.size()));
  }
  return fixed_index;
}

// Reservoir/cushion map: lowest level at or below the reservoir, highest at or
// above reservoir + cushion, linear in between.
inline int bb_select(double buffer, const BBConfig& cfg, std::span<const QualityLevel> levels) {
  if (levels.empty()) throw ConfigError("bb_select: empty level set");
  if (!(cfg.cushion > 0.0) || !(cfg.reservoir >= 0.0)) throw ConfigError("bb_select: invalid reservoir/cushion");
  const int n = static_cast<int>(levels.size());
  if (buffer <= cfg.reservoir) return 1;
  if (buffer >= cfg.reservoir + cfg.cushion) return n;
  const int idx = 1 + static_cast<int>(std::floor((buffer - cfg.reservoir) / cfg.cushion * (n - 1)));
  return std::clamp(idx, 1, n);
}

enum class ControllerKind { Proposed, FBR, BB };

inline std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Proposed: return "proposed";
    case ControllerKind::FBR: return "fbr";
    case ControllerKind::BB: return "bb";
  }
  return "?";
}

inline ControllerKind controller_kind_from_string(std::string_view s) {
  for (auto k : {ControllerKind::Proposed, ControllerKind::FBR, ControllerKind::BB}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError(fmt::format("unknown controller type '{}' (expected proposed, fbr or bb)", s));
}

struct ControllerSpec {
  ControllerKind kind{ControllerKind::Proposed};
  int fixed_level{1};  // FBR only
  BBConfig bb;         // BB only

  // Stable label for file names and tables, e.g. "fbr3".
  std::string label() const {
    if (kind == ControllerKind::FBR) return fmt::format("fbr{}", fixed_level);
    return std::string(to_string(kind));
  }

  bool operator==(const ControllerSpec&) const = default;
};

struct Decision {
  int level{1};
  double buffer{0.0};
  double rebuffer{0.0};
  double lambda{0.0};
};

// Per-session quality-selection state machine. Each step advances the buffer
// by the elapsed time dt, pays the previous chunk's delay, selects a level and
// (for the Lagrangian controller) updates the multiplier. `now` is recorded as
// the last decision time.
class Controller {
 public:
  Controller(ControllerSpec spec, ControllerConfig cfg, std::vector<QualityLevel> levels)
      : spec_(spec), cfg_(cfg), levels_(std::move(levels)) {
    cfg_.validate();
    validate_levels(levels_);
    if (spec_.kind == ControllerKind::FBR) fbr_select(spec_.fixed_level, levels_);
    if (spec_.kind == ControllerKind::BB) spec_.bb.validate(cfg_.buffer_max);
    state_.lambda = cfg_.lambda_init;
  }

  Decision step(double dt, double delay_prev, double now) {
    const auto buf = update_buffer(state_.buffer, dt, delay_prev, cfg_.buffer_max);
    state_.buffer = buf.buffer;

    int level = 1;
    switch (spec_.kind) {
      case ControllerKind::Proposed:
        level = select_quality(levels_, state_.buffer, state_.lambda, cfg_.gamma);
        state_.lambda = update_lambda(state_.lambda, state_.buffer, cfg_.buffer_max, cfg_.beta);
        break;
      case ControllerKind::FBR:
        level = fbr_select(spec_.fixed_level, levels_);
        break;
      case ControllerKind::BB:
        level = bb_select(state_.buffer, spec_.bb, levels_);
        break;
    }
    state_.t_last = now;
    return {level, state_.buffer, buf.rebuffer, state_.lambda};
  }

  const ControllerState& state() const noexcept { return state_; }
  const ControllerSpec& spec() const noexcept { return spec_; }
  const ControllerConfig& config() const noexcept { return cfg_; }
  const std::vector<QualityLevel>& levels() const noexcept { return levels_; }

 private:
  ControllerSpec spec_;
  ControllerConfig cfg_;
  std::vector<QualityLevel> levels_;
  ControllerState state_;
};

}  // namespace gvc
