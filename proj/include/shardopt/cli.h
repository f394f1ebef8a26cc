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

// Command-line front end. Exit codes:
//   0  success
//   1  unexpected failure (I/O, internal error)
//   2  invalid input: malformed JSON, schema or validation errors, bad flags
//   3  infeasible: the memory budget cannot be met

#ifndef SHARDOPT_CLI_H_
#define SHARDOPT_CLI_H_

#include <iosfwd>

namespace shardopt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitInfeasible = 3;

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace shardopt

#endif  // SHARDOPT_CLI_H_
