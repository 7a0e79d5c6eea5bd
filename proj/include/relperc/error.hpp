#pragma once

#include <stdexcept>
#include <string>

namespace relperc {

/// Invalid input: malformed element strings, unknown DSL tokens, bad ranges.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configurable resource cap (ball size, exploration budget) was exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact check found a violation, or a precondition of an exact check
/// (e.g. monotonicity of an event) does not hold.
class OracleViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A walk could not make any in-ball move.
class WalkTrapped : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relperc
