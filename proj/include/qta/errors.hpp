// Copyright 2026 The qta Authors.
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qta {

// Base of every error the toolkit throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: out-of-range indices, inconsistent fractions, empty datasets.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized input. `locator` names the line or record path.
class ParseError : public Error {
 public:
  ParseError(std::string locator, const std::string& what)
      : Error(locator.empty() ? what : locator + ": " + what),
        locator_(std::move(locator)) {}

  const std::string& locator() const noexcept { return locator_; }

 private:
  std::string locator_;
};

// Well-formed input that breaks a data invariant (duplicate ids, missing predictions).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A remote model service misbehaved or could not be reached.
class ServiceError : public Error {
 public:
  using Error::Error;
};

// The service could not be reached at all (connection refused, timeout).
class TransportError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// The service answered, but with a body that violates the wire protocol.
class ProtocolError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

class TranslationError : public ServiceError {
 public:
  TranslationError(const std::string& what, std::vector<std::size_t> failed_indices,
                   bool unreachable = false)
      : ServiceError(what), failed_indices_(std::move(failed_indices)), unreachable_(unreachable) {}

  // Indices into the input text list that were not translated.
  const std::vector<std::size_t>& failed_indices() const noexcept { return failed_indices_; }

  // True when the backend could not be reached at all (outage, not a bad answer).
  bool unreachable() const noexcept { return unreachable_; }

 private:
  std::vector<std::size_t> failed_indices_;
  bool unreachable_ = false;
};

class ScorerUnavailable : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// Checkpoint does not belong to this dataset/config, or is corrupt.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace qta
