#pragma once

#include <stdexcept>
#include <string>

namespace ncl {

/// Input rejected because shapes or sizes do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A call violated an API contract (e.g. backward on a stale trace).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Checkpoint file unreadable, truncated, or of the wrong version.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or gradient.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config file missing, malformed, or containing unknown keys.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// CSV ingestion failure; message carries row/column coordinates.
struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ncl
