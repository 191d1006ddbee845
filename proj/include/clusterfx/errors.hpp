#pragma once

#include <stdexcept>
#include <string>

namespace clusterfx {

// Invalid parameters or configuration (bad u_n/a_n, r_n > n, malformed config).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Points of inconsistent dimension, or a functional applied to the wrong E.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A quantity that does not exist for the given data, e.g. scaling with v = 0
// or a Hill estimate without exceedances.
class UndefinedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clusterfx
