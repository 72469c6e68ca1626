#pragma once

#include <stdexcept>
#include <string>

namespace kwmhn {

/// Parameters outside the supported domain (CLI exit code 3).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few usable observations for a statistic or fit.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent run results or malformed input files.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kwmhn
