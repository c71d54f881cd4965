// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dkps {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Malformed or inconsistent dataset contents (parse failures, missing
// records, invariant violations found while loading).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration: unknown method names, invalid grids, schema
// version mismatches, out-of-range knobs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation precondition violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace dkps
