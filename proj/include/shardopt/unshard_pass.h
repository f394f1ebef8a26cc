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

#ifndef SHARDOPT_UNSHARD_PASS_H_
#define SHARDOPT_UNSHARD_PASS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/graph.h"
#include "shardopt/shard_pass.h"
#include "shardopt/simulator.h"

namespace shardopt {

struct UnshardDecision {
  ParamId param = 0;
  std::int64_t buffer_bytes = 0;  // B_ag
  double ratio = 0.0;             // T_c(B_ag) / B_ag
  bool selected = false;
  std::int64_t cumulative_bytes = 0;  // selected bytes after this decision

  bool operator==(const UnshardDecision&) const = default;
};

struct UnshardSelection {
  std::vector<ParamId> selected;  // ascending id
  std::int64_t projected_peak_bytes = 0;
  std::vector<UnshardDecision> log;  // priority order
};

// Greedy selection by descending T_c(B_ag)/B_ag (ties: ascending id). A
// parameter is admitted when the profiled peak plus every admitted buffer
// still fits under M; one that does not fit is skipped and the scan goes on.
UnshardSelection select_unshard(std::span<const Parameter> params,
                                const MemoryProfile& profile,
                                const ClusterConfig& cluster,
                                const CostModel& cost);

// Keeps each selected parameter gathered from its earliest all-gather until
// the step-end marker: later gathers of it are dropped (or shrunk when
// fused with other parameters), all its releases but one are removed, and
// the survivor moves right after the step-end marker.
//
// Throws Error(kMissingStepMarker) when `selected` is non-empty and the
// graph has no step-end marker.
PassResult apply_unshard(const Graph& graph, const Schedule& schedule,
                         std::span<const ParamId> selected);

}  // namespace shardopt

#endif  // SHARDOPT_UNSHARD_PASS_H_
