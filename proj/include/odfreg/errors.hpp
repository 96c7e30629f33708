#pragma once

#include <stdexcept>
#include <string>

namespace odf {

// Caller passed something structurally wrong (bad sizes, missing config
// keys, invalid CLI arguments).  Maps to exit code 2 in the CLI.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A file could not be parsed: bad magic, truncated payload, checksum or
// version mismatch, malformed config.  Maps to exit code 3.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: folded deformation, rank-deficient basis, values
// outside the chart of a manifold map.  Maps to exit code 4.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace odf
