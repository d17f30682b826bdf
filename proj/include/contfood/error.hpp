#pragma once

#include <stdexcept>
#include <string>

namespace contfood {

/// Bad or inconsistent input data (missing file, malformed row, corrupt payload).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter or loss became non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace contfood
