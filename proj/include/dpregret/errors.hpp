//
// Copyright 2026 The dpregret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#ifndef DPREGRET_ERRORS_HPP_
#define DPREGRET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpregret {

// Bad arguments: dimension mismatch, non-PD cost matrix, negative incentive.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix that should be invertible is numerically singular.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough samples to fit or estimate something.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid experiment configuration. `field` names the offending
// JSON path, e.g. "system.Q" or "sources[1].alpha".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace dpregret

#endif  // DPREGRET_ERRORS_HPP_
