// Copyright 2026 The qaforge Authors.
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

#include <stdexcept>
#include <string>

namespace qaforge {

// Exception categories map one-to-one onto CLI exit codes (see cli.hpp).

/// Bad input data, bad arguments, violated preconditions. Exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model-backed provider failed or is unreachable. Exit code 2.
class ProviderError : public std::runtime_error {
 public:
  enum class Kind { kUnavailable, kBadResponse, kRoleUnavailable };

  ProviderError(Kind kind, const std::string& role, const std::string& what)
      : std::runtime_error(role + ": " + what), kind_(kind), role_(role) {}

  Kind kind() const { return kind_; }
  const std::string& role() const { return role_; }

 private:
  Kind kind_;
  std::string role_;
};

/// Filesystem or stream failure. Exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qaforge
