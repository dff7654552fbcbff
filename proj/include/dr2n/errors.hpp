#pragma once

#include <stdexcept>
#include <string>

namespace dr2n {

/// Dimension or shape violation in a tensor operation. The message names
/// the offending shapes.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Masked softmax invoked with no admissible entries.
class DegenerateAttentionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration: bad ranges, malformed tables,
/// unknown keys, incompatible checkpoint.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure; the message carries the path.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value where a finite one is required (diverged loss,
/// NaN gradient). The message names the parameter or step.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dr2n
