// Copyright 2026 The dcac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCAC_ERROR_HPP_
#define DCAC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dcac {

// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents do not fit the requested operation.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// NaN or otherwise unusable numeric input.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Invalid or inconsistent configuration value.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Batch statistics requested from a population of fewer than two elements.
class DegenerateBatchError : public Error {
 public:
  explicit DegenerateBatchError(const std::string& msg) : Error(msg) {}
};

// Target sequence cannot be aligned to the available number of frames.
class InfeasibleAlignmentError : public Error {
 public:
  explicit InfeasibleAlignmentError(const std::string& msg) : Error(msg) {}
};

// A cached structure no longer matches the data it was derived from.
class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& msg) : Error(msg) {}
};

// File system failure while reading or writing artifacts.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Training loss became non-finite.
class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(const std::string& msg) : Error(msg) {}
};

}  // namespace dcac

#endif  // DCAC_ERROR_HPP_
