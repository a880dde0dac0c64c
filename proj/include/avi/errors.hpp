#pragma once

#include <stdexcept>
#include <string>

namespace avi {

// Bad user-supplied configuration (sizes, flags, schedule settings).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset content violates its contract (codes out of range, bad values).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries the 1-based line number.
struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, int line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line(line) {}
  int line;
};

// A structural invariant failed mid-run (non-SPD matrix, non-positive
// Dirichlet parameter). Indicates a bug or numerically hopeless input.
struct invariant_error : std::runtime_error {
  explicit invariant_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace avi
