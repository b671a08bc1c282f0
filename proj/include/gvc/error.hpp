#pragma once

#include <stdexcept>
#include <string>

namespace gvc {

// Invalid configuration or parameter record. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid trace contents (CSV or JSON).
class TraceError : public std::runtime_error {
 public:
  enum class Kind { Empty, BadHeader, MalformedRow, NegativeBandwidth, NonMonotoneTime, BadStart, BadDuration };

  TraceError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  Kind kind() const noexcept { return kind_; }
  // 1-based line number in the source, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

// The trace ran out before a transmission completed. Maps to CLI exit code 3.
class TraceExhausted : public std::runtime_error {
 public:
  TraceExhausted(double megabits_remaining, const std::string& what)
      : std::runtime_error(what), remaining_(megabits_remaining) {}

  double megabits_remaining() const noexcept { return remaining_; }

 private:
  double remaining_;
};

}  // namespace gvc
