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

#include "shardopt/simulator.h"

#include <algorithm>
#include <string>
#include <tuple>

#include "shardopt/error.h"

namespace shardopt {
namespace {

bool IsOffloadSync(const Graph& graph, const Node& node) {
  if (node.kind != NodeKind::kTransferSync) return false;
  for (NodeId d : node.deps) {
    const Node& dep = graph.node(d);
    if (dep.kind == NodeKind::kOffloadStart && dep.refs == node.refs) {
      return true;
    }
  }
  return false;
}

std::int64_t Duration(const Graph& graph, const Node& node,
                      const CostModel& cost) {
  switch (node.kind) {
    case NodeKind::kCompute:
    case NodeKind::kOptimizerStep:
      return node.duration_us;
    case NodeKind::kAllGather:
    case NodeKind::kReduceScatter:
      return cost.comm_time_us(graph.gathered_bytes(node));
    case NodeKind::kOffloadStart:
    case NodeKind::kReloadStart:
      return cost.host_transfer_time_us(
          graph.fragment(node.refs.front()).size_bytes);
    case NodeKind::kRelease:
    case NodeKind::kTransferSync:
    case NodeKind::kMarker:
      return 0;
  }
  return 0;
}

void RequireValid(const Graph& graph, const Schedule& schedule) {
  auto violations = validate(graph, schedule);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw Error(ErrorCode::kInvalidInput,
                "schedule is invalid: " +
                    std::string(ViolationKindName(v.kind)) + " at node " +
                    std::to_string(v.node),
                v.node);
  }
}

// Length of the intersection of two sorted, internally disjoint interval
// lists.
std::int64_t IntersectionLength(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& a,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& b) {
  std::int64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const auto lo = std::max(a[i].first, b[j].first);
    const auto hi = std::min(a[i].second, b[j].second);
    if (hi > lo) total += hi - lo;
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

}  // namespace

std::string_view StreamName(Stream stream) {
  switch (stream) {
    case Stream::kCompute:
      return "compute";
    case Stream::kCollective:
      return "collective";
    case Stream::kHostTransfer:
      return "host_transfer";
  }
  return "?";
}

Stream StreamOf(NodeKind kind) {
  switch (kind) {
    case NodeKind::kAllGather:
    case NodeKind::kReduceScatter:
      return Stream::kCollective;
    case NodeKind::kOffloadStart:
    case NodeKind::kReloadStart:
      return Stream::kHostTransfer;
    default:
      return Stream::kCompute;
  }
}

std::int64_t StartAllocation(const Graph& graph, const Node& node) {
  switch (node.kind) {
    case NodeKind::kAllGather:
      return graph.gathered_bytes(node);
    case NodeKind::kReloadStart:
      return graph.fragment(node.refs.front()).size_bytes;
    default:
      return 0;
  }
}

std::int64_t EndRelease(const Graph& graph, const Node& node) {
  if (node.kind == NodeKind::kRelease) {
    return allgather_buffer_size(graph.param(node.refs.front()));
  }
  if (IsOffloadSync(graph, node)) {
    return graph.fragment(node.refs.front()).size_bytes;
  }
  return 0;
}

std::int64_t InitialResidency(const Graph& graph, const SimOptions& options) {
  std::int64_t bytes = 0;
  for (const auto& p : graph.params()) bytes += p.sharded_bytes();
  if (options.optimizer_state_resident) bytes += graph.total_fragment_bytes();
  return bytes;
}

const TimelineEvent& SimReport::event(NodeId node) const {
  for (const auto& e : timeline) {
    if (e.node == node) return e;
  }
  throw Error(ErrorCode::kInvalidInput,
              "node " + std::to_string(node) + " not in timeline", node);
}

std::int64_t MemoryProfile::at(NodeId node) const {
  auto it = before.find(node);
  if (it == before.end()) {
    throw Error(ErrorCode::kProfileMismatch,
                "profile has no entry for node " + std::to_string(node), node);
  }
  return it->second;
}

std::int64_t MemoryProfile::across_at(NodeId node) const {
  auto it = across.find(node);
  if (it == across.end()) {
    throw Error(ErrorCode::kProfileMismatch,
                "profile has no entry for node " + std::to_string(node), node);
  }
  return it->second;
}

SimReport simulate(const Graph& graph, const Schedule& schedule,
                   const CostModel& cost, const ClusterConfig& cluster,
                   const SimOptions& options) {
  RequireValid(graph, schedule);
  SimReport report;
  report.initial_memory_bytes = InitialResidency(graph, options);

  std::unordered_map<NodeId, std::int64_t> end_time;
  std::int64_t ready[3] = {0, 0, 0};
  std::vector<std::pair<std::int64_t, std::int64_t>> busy[3];

  report.timeline.reserve(schedule.size());
  for (NodeId id : schedule.order) {
    const Node& n = graph.node(id);
    const Stream stream = StreamOf(n.kind);
    const auto s = static_cast<int>(stream);
    std::int64_t start = ready[s];
    for (NodeId d : n.deps) start = std::max(start, end_time.at(d));
    // Off-compute work is issued from the compute stream at its schedule
    // position, so it waits for every compute-stream node scheduled before
    // it.
    if (stream != Stream::kCompute) {
      start = std::max(start, ready[static_cast<int>(Stream::kCompute)]);
    }
    const std::int64_t end = start + Duration(graph, n, cost);
    ready[s] = end;
    end_time[id] = end;
    if (end > start) busy[s].emplace_back(start, end);
    report.timeline.push_back({id, n.kind, stream, start, end});
    report.iteration_time_us = std::max(report.iteration_time_us, end);

    if (n.kind == NodeKind::kAllGather || n.kind == NodeKind::kReduceScatter) {
      report.total_collective_bytes += graph.gathered_bytes(n);
    }
    if (n.kind == NodeKind::kAllGather) {
      ++report.gather_count;
      report.gathered_bytes += graph.gathered_bytes(n);
    }
  }

  auto busy_total = [](const auto& intervals) {
    std::int64_t t = 0;
    for (const auto& [a, b] : intervals) t += b - a;
    return t;
  };
  report.compute_busy_us = busy_total(busy[0]);
  report.collective_busy_us = busy_total(busy[1]);
  report.host_transfer_busy_us = busy_total(busy[2]);
  if (report.collective_busy_us > 0) {
    report.overlap_fraction =
        static_cast<double>(IntersectionLength(busy[0], busy[1])) /
        static_cast<double>(report.collective_busy_us);
  }

  // Memory events ordered by (time, schedule position, start before end).
  struct MemEvent {
    std::int64_t time;
    std::size_t position;
    int is_end;
    std::int64_t delta;
    NodeId node;
  };
  std::vector<MemEvent> events;
  events.reserve(2 * schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Node& n = graph.node(schedule.order[i]);
    const TimelineEvent& t = report.timeline[i];
    const std::int64_t alloc = StartAllocation(graph, n) + n.transient_bytes;
    const std::int64_t release = EndRelease(graph, n);
    if (alloc != 0) events.push_back({t.start_us, i, 0, alloc, n.id});
    const std::int64_t end_delta =
        n.persistent_delta_bytes - n.transient_bytes - release;
    if (end_delta != 0) events.push_back({t.end_us, i, 1, end_delta, n.id});
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.time, a.position, a.is_end) <
           std::tie(b.time, b.position, b.is_end);
  });

  const std::int64_t limit = cluster.usable_device_bytes();
  std::int64_t resident = report.initial_memory_bytes;
  report.peak_memory_bytes = resident;
  report.memory_trace.push_back({0, resident});
  bool over = resident > limit;
  for (const auto& e : events) {
    resident += e.delta;
    report.memory_trace.push_back({e.time, resident});
    report.peak_memory_bytes = std::max(report.peak_memory_bytes, resident);
    if (resident > limit && !over) {
      report.overflows.push_back({e.time, resident, e.node});
    }
    over = resident > limit;
  }
  report.final_memory_bytes = resident;
  return report;
}

MemoryProfile profile(const Graph& graph, const Schedule& schedule,
                      const CostModel& /*cost*/, const ClusterConfig& /*cluster*/,
                      const SimOptions& options) {
  RequireValid(graph, schedule);
  MemoryProfile prof;
  prof.initial_bytes = InitialResidency(graph, options);
  prof.optimizer_allocated = options.optimizer_state_resident;
  prof.optimizer_bytes =
      options.optimizer_state_resident ? graph.total_fragment_bytes() : 0;

  std::int64_t resident = prof.initial_bytes;
  prof.peak_bytes = resident;
  for (NodeId id : schedule.order) {
    const Node& n = graph.node(id);
    prof.before.emplace(id, resident);
    const std::int64_t during =
        resident + StartAllocation(graph, n) + n.transient_bytes;
    prof.peak_bytes = std::max(prof.peak_bytes, during);
    resident = during - n.transient_bytes + n.persistent_delta_bytes -
               EndRelease(graph, n);
    prof.across.emplace(id, std::max(during, resident));
  }
  prof.peak_bytes = std::max(prof.peak_bytes, resident);
  return prof;
}

}  // namespace shardopt
