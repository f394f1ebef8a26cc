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

#include "shardopt/error.h"

namespace shardopt {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return "InvalidInput";
    case ErrorCode::kParseError:
      return "ParseError";
    case ErrorCode::kUnusedParameter:
      return "UnusedParameter";
    case ErrorCode::kDependencyViolation:
      return "DependencyViolation";
    case ErrorCode::kAlreadySharded:
      return "AlreadySharded";
    case ErrorCode::kProfileMismatch:
      return "ProfileMismatch";
    case ErrorCode::kInfeasibleBaseline:
      return "InfeasibleBaseline";
    case ErrorCode::kMissingStepMarker:
      return "MissingStepMarker";
    case ErrorCode::kInsufficientHostCapacity:
      return "InsufficientHostCapacity";
    case ErrorCode::kInfeasible:
      return "Infeasible";
  }
  return "Unknown";
}

}  // namespace shardopt
