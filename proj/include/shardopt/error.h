/* Copyright 2026 The shardopt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SHARDOPT_ERROR_H_
#define SHARDOPT_ERROR_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shardopt {

enum class ErrorCode {
  kInvalidInput,
  kParseError,
  kUnusedParameter,
  kDependencyViolation,
  kAlreadySharded,
  kProfileMismatch,
  kInfeasibleBaseline,
  kMissingStepMarker,
  kInsufficientHostCapacity,
  kInfeasible,
};

std::string_view ErrorCodeName(ErrorCode code);

// Thrown by passes and loaders. `node` names the offending operator when
// there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::int64_t> node = std::nullopt)
      : std::runtime_error(message), code_(code), node_(node) {}

  ErrorCode code() const { return code_; }
  std::optional<std::int64_t> node() const { return node_; }

  // Infeasibility errors map to a distinct CLI exit code.
  bool is_infeasibility() const {
    return code_ == ErrorCode::kInfeasibleBaseline ||
           code_ == ErrorCode::kInfeasible ||
           code_ == ErrorCode::kInsufficientHostCapacity;
  }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> node_;
};

// Non-fatal findings surfaced by passes and the pipeline.
struct Diagnostic {
  std::string code;
  std::string message;
  std::optional<std::int64_t> node;

  bool operator==(const Diagnostic&) const = default;
};

}  // namespace shardopt

#endif  // SHARDOPT_ERROR_H_
