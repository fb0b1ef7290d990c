#pragma once

#include <stdexcept>
#include <string>

namespace pdeep {

// Error categories map onto CLI exit codes: configuration (2), data (3),
// numeric (4). Precondition violations in library calls throw
// std::invalid_argument and are reported as configuration errors.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pdeep
