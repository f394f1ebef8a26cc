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

#ifndef SHARDOPT_WORKLOAD_H_
#define SHARDOPT_WORKLOAD_H_

#include <cstdint>

#include "shardopt/graph.h"

namespace shardopt {

// A synthetic layered training step: per micro-step a forward chain over
// the layers and a backward chain in reverse layer order, followed by one
// optimizer step. Each layer owns one parameter.
struct WorkloadSpec {
  int layers = 16;
  std::int64_t compute_us = 10'000;  // forward compute per layer
  std::int64_t param_bytes = 256 << 20;
  int accumulation_steps = 1;
  // Optimizer-state bytes per parameter byte (2 for Adam's two moments).
  double optimizer_multiplier = 2.0;
  // Activation bytes a forward layer keeps until its backward layer.
  std::int64_t activation_bytes = 0;
  std::int64_t transient_bytes = 0;
  int backward_factor = 2;
  int fragment_count = 32;
  std::int64_t optimizer_step_us = 1'000;
  bool forward_only = false;
};

// Throws Error(kInvalidInput) on non-positive sizes or counts.
Graph generate_workload(const WorkloadSpec& spec);

}  // namespace shardopt

#endif  // SHARDOPT_WORKLOAD_H_
