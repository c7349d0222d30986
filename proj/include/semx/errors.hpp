// Copyright 2026 The SEMX Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEMX_ERRORS_HPP_
#define SEMX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace semx {

// Error classes. The CLI maps each family onto a process exit code, see
// cli.hpp.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates an operation's precondition (non-simplex target row,
/// mixing ratio outside [0,1], non one-hot label...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The call itself is malformed (non-scalar loss, empty dataset, too few
/// samples for a request).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in a forward or backward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents: bad magic, unsupported version, bad record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File shorter than its header declares, or inconsistent counts between
/// paired files.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace semx

#endif  // SEMX_ERRORS_HPP_
