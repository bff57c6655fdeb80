#pragma once

#include <stdexcept>
#include <string>

namespace flowguard {

// Error classes map onto the CLI exit-code contract:
//   ConfigError -> 1, NumericError -> 2, IoError -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid inputs to numeric routines, domain errors, non-PD models,
// solver failures, divergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace flowguard
