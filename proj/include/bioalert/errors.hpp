#pragma once

#include <stdexcept>

namespace bioalert {

// Bad inputs: unreadable files, malformed records, contract violations.
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, non-finite values. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bioalert
