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

// Proactive prefetching: a reverse scan over the sharded schedule that
// groups all-gathers and issues each group as early as the profiled memory
// allows, fusing small collectives inside a group.

#ifndef SHARDOPT_PREFETCH_PASS_H_
#define SHARDOPT_PREFETCH_PASS_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/error.h"
#include "shardopt/graph.h"
#include "shardopt/simulator.h"

namespace shardopt {

enum class PrefetchMode {
  // Memory is checked only where the scan examines an all-gather.
  kFaithful,
  // Additionally checks every operator a group is moved across, and the
  // slot each member leaves behind, emitting the group early when needed.
  kStrict,
};

enum class PrefetchAction {
  kGrouped,     // joined the pending group
  kFlushed,     // check failed; pending group emitted here, node re-examined
  kEmitted,     // left at its original position
  kUnexamined,  // first operator of the schedule
};

std::string_view PrefetchActionName(PrefetchAction action);

struct PrefetchDecision {
  NodeId node = 0;
  PrefetchAction action = PrefetchAction::kEmitted;
  std::int64_t group_bytes = 0;       // Σ B_ag over the candidate group
  std::int64_t checkpoint_bytes = 0;  // P_mem(previous op) + group_bytes
  std::size_t position = 0;           // index in the input schedule

  bool operator==(const PrefetchDecision&) const = default;
};

struct GroupEmission {
  // The group is issued immediately after this input-schedule position;
  // the final group uses position 0 (right after the first operator).
  std::size_t position = 0;
  std::vector<NodeId> members;  // input-schedule order
  std::int64_t bytes = 0;
  bool strict_flush = false;
  // Emitted because the next operator of the scan is a dependency of a
  // member.
  bool dependency_flush = false;

  bool operator==(const GroupEmission&) const = default;
};

struct FusedGather {
  std::vector<NodeId> members;  // gathers merged into one collective
  std::int64_t bytes = 0;
  NodeId node = 0;              // resulting node id

  bool operator==(const FusedGather&) const = default;
};

struct PrefetchLog {
  std::vector<PrefetchDecision> decisions;  // reverse-scan order
  std::vector<GroupEmission> emissions;     // reverse-scan order
  std::vector<FusedGather> fusions;         // output order, multi-member only
};

struct PrefetchOptions {
  PrefetchMode mode = PrefetchMode::kFaithful;
};

struct PrefetchResult {
  Graph graph;
  Schedule schedule;
  PrefetchLog log;
  std::vector<Diagnostic> warnings;
};

// Splits `group` (all-gather ids in schedule order) into collectives by
// folding left to right: the running collective absorbs the next gather
// while should_fuse(running bytes, next bytes, alpha) holds. The returned
// `node` fields are left at 0.
std::vector<FusedGather> fuse(const Graph& graph, std::span<const NodeId> group,
                              const CostModel& cost, double alpha);

// A pending group is never moved above a dependency of one of its members
// (for sharded schedules, the previous release of the same parameter); the
// group is emitted right after that dependency instead.
//
// Throws Error(kProfileMismatch) if `profile` misses a scheduled node, and
// Error(kInfeasibleBaseline) if some all-gather already reaches M at its
// original position.
PrefetchResult apply_prefetch(const Graph& graph, const Schedule& schedule,
                              const MemoryProfile& profile,
                              const ClusterConfig& cluster,
                              const CostModel& cost,
                              const PrefetchOptions& options = {});

}  // namespace shardopt

#endif  // SHARDOPT_PREFETCH_PASS_H_
