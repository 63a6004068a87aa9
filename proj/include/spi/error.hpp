#pragma once

#include <stdexcept>
#include <string>

namespace spi {

// Bad input: empty data, dimension mismatches, malformed files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular systems, divergent optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid options or contradictory requests from a caller.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spi
