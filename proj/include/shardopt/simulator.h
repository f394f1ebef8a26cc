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

// Deterministic execution model for schedules. Three FIFO streams
// (compute, collective, host transfer) run in integer microseconds; memory
// is tracked both along the timeline and in schedule (issue) order.

#ifndef SHARDOPT_SIMULATOR_H_
#define SHARDOPT_SIMULATOR_H_

#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/graph.h"

namespace shardopt {

enum class Stream { kCompute, kCollective, kHostTransfer };

std::string_view StreamName(Stream stream);
Stream StreamOf(NodeKind kind);

struct SimOptions {
  // Whether optimizer states occupy device memory at iteration start. They
  // are allocated by the first parameter update, so the first profiled
  // iteration runs without them.
  bool optimizer_state_resident = false;
};

struct TimelineEvent {
  NodeId node = 0;
  NodeKind kind = NodeKind::kCompute;
  Stream stream = Stream::kCompute;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;

  bool operator==(const TimelineEvent&) const = default;
};

struct MemorySample {
  std::int64_t time_us = 0;
  std::int64_t resident_bytes = 0;

  bool operator==(const MemorySample&) const = default;
};

struct MemoryOverflow {
  std::int64_t time_us = 0;
  std::int64_t resident_bytes = 0;
  NodeId node = 0;

  bool operator==(const MemoryOverflow&) const = default;
};

struct SimReport {
  std::int64_t iteration_time_us = 0;
  std::int64_t peak_memory_bytes = 0;
  std::int64_t initial_memory_bytes = 0;
  std::int64_t final_memory_bytes = 0;
  std::vector<TimelineEvent> timeline;  // schedule order
  std::vector<MemorySample> memory_trace;
  std::int64_t total_collective_bytes = 0;
  std::int64_t gather_count = 0;
  std::int64_t gathered_bytes = 0;
  std::int64_t compute_busy_us = 0;
  std::int64_t collective_busy_us = 0;
  std::int64_t host_transfer_busy_us = 0;
  // Collective busy time overlapped with compute busy time, over total
  // collective busy time. Zero when there is no collective traffic.
  double overlap_fraction = 0.0;
  std::vector<MemoryOverflow> overflows;

  const TimelineEvent& event(NodeId node) const;
  bool operator==(const SimReport&) const = default;
};

// P_mem: resident bytes immediately before each node is issued, accumulated
// in schedule order. Every timeline state of the simulator is bounded by
// one of these issue-order states, so the profile's peak bounds the
// simulated peak.
struct MemoryProfile {
  std::map<NodeId, std::int64_t> before;
  // Largest resident size from a node's start through its completion:
  // max(before + start allocation + transient, size after it ends).
  std::map<NodeId, std::int64_t> across;
  // Largest resident size while any node runs, including transient and
  // issue-time allocations.
  std::int64_t peak_bytes = 0;
  std::int64_t initial_bytes = 0;
  // Optimizer-state bytes resident at iteration start and included in
  // every `before` value.
  std::int64_t optimizer_bytes = 0;
  bool optimizer_allocated = false;

  // Throws Error(kProfileMismatch) when `node` was not profiled.
  std::int64_t at(NodeId node) const;
  std::int64_t across_at(NodeId node) const;
  bool covers(NodeId node) const { return before.contains(node); }
};

// Throws Error(kInvalidInput) when the schedule fails validate().
SimReport simulate(const Graph& graph, const Schedule& schedule,
                   const CostModel& cost, const ClusterConfig& cluster,
                   const SimOptions& options = {});

MemoryProfile profile(const Graph& graph, const Schedule& schedule,
                      const CostModel& cost, const ClusterConfig& cluster,
                      const SimOptions& options = {});

// Bytes a node adds to residency when it starts (gather buffers, reload
// destinations) and removes when it ends (releases, offload completions).
// Transient and persistent annotations are not included.
std::int64_t StartAllocation(const Graph& graph, const Node& node);
std::int64_t EndRelease(const Graph& graph, const Node& node);

// Σ sharded parameter bytes, plus all optimizer fragments when resident.
std::int64_t InitialResidency(const Graph& graph, const SimOptions& options);

}  // namespace shardopt

#endif  // SHARDOPT_SIMULATOR_H_
