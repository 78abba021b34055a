#pragma once

#include <stdexcept>

namespace snaper {

// Configuration / CLI input problems. Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures while executing a run (divergence storms, I/O trouble, ...).
// Mapped to exit code 1 by the CLI.
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A statistic was requested on a series without enough variation to
// estimate it (e.g. a constant trace).
struct DegenerateSeriesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace snaper
