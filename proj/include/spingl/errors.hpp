#pragma once

#include <stdexcept>
#include <string>

namespace spingl {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Loewner-order violation: a matrix required to be PSD (or a chain required
/// to be monotone) fails its eigenvalue check. The message names the
/// offending minimum eigenvalue.
struct OrderViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parse or validation failure in a user-supplied file; message carries the
/// file name and a JSON-pointer-style location.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spingl
