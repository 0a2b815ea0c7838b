#pragma once

#include <stdexcept>
#include <string>

namespace cstrans {

// Malformed or inconsistent input records (bad CSV cell, non-binary delta, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Impossible configuration: bad family spec, too few distinct values, m <= d, ...
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Breakdown while iterating: lost concavity, singular scatter matrix,
// diverging series, degenerate censoring pattern.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cstrans
