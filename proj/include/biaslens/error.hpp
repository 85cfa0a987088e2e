#pragma once

#include <stdexcept>
#include <string>

namespace biaslens {

/// Bad input data: malformed files, invariant violations, out-of-range values.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or flag combinations at an API or CLI boundary.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures (missing file, unwritable path).
class IoError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace biaslens
