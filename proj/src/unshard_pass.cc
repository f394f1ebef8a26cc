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

#include "shardopt/unshard_pass.h"

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "shardopt/error.h"

namespace shardopt {

UnshardSelection select_unshard(std::span<const Parameter> params,
                                const MemoryProfile& profile,
                                const ClusterConfig& cluster,
                                const CostModel& cost) {
  struct Candidate {
    ParamId id;
    std::int64_t bytes;
    double ratio;
  };
  std::vector<Candidate> order;
  order.reserve(params.size());
  for (const auto& p : params) {
    const std::int64_t bytes = allgather_buffer_size(p);
    order.push_back(
        {p.id, bytes, cost.comm_time(bytes) / static_cast<double>(bytes)});
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    return a.id < b.id;
  });

  UnshardSelection sel;
  std::int64_t used = 0;
  for (const auto& c : order) {
    const bool fits =
        profile.peak_bytes + used + c.bytes <= cluster.memory_limit_bytes;
    if (fits) {
      used += c.bytes;
      sel.selected.push_back(c.id);
    }
    sel.log.push_back({c.id, c.bytes, c.ratio, fits, used});
  }
  std::sort(sel.selected.begin(), sel.selected.end());
  sel.projected_peak_bytes = profile.peak_bytes + used;
  return sel;
}

PassResult apply_unshard(const Graph& graph, const Schedule& schedule,
                         std::span<const ParamId> selected) {
  if (!validate(graph, schedule).empty()) {
    throw Error(ErrorCode::kInvalidInput, "input schedule is invalid");
  }
  PassResult result;
  result.schedule.provenance = schedule.provenance;
  result.schedule.provenance.push_back("unshard");
  if (selected.empty()) {
    result.graph = graph;
    result.schedule.order = schedule.order;
    return result;
  }

  std::optional<NodeId> step_end;
  for (NodeId id : schedule.order) {
    if (graph.node(id).marker == MarkerKind::kStepEnd) step_end = id;
  }
  if (!step_end) {
    throw Error(ErrorCode::kMissingStepMarker,
                "no step-end marker to host deferred releases");
  }

  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  std::unordered_map<NodeId, std::size_t> slot;
  for (std::size_t i = 0; i < nodes.size(); ++i) slot[nodes[i].id] = i;

  std::unordered_set<NodeId> dropped;
  std::vector<NodeId> deferred;  // surviving releases, ascending param id
  const std::set<ParamId> chosen(selected.begin(), selected.end());

  for (ParamId p : chosen) {
    std::vector<NodeId> gathers, releases, consumers;
    for (NodeId id : schedule.order) {
      const Node& n = nodes[slot.at(id)];
      const bool uses_p =
          std::find(n.refs.begin(), n.refs.end(), p) != n.refs.end();
      if (!uses_p) continue;
      if (n.kind == NodeKind::kAllGather) gathers.push_back(id);
      if (n.kind == NodeKind::kRelease) releases.push_back(id);
      if (n.kind == NodeKind::kCompute) consumers.push_back(id);
    }
    if (gathers.empty()) {
      result.warnings.push_back({"NotSharded",
                                 "parameter " + std::to_string(p) +
                                     " has no all-gather; nothing to unshard",
                                 std::nullopt});
      continue;
    }
    const NodeId kept = gathers.front();
    const std::unordered_set<NodeId> later(gathers.begin() + 1, gathers.end());
    for (NodeId g : later) {
      Node& n = nodes[slot.at(g)];
      std::erase(n.refs, p);
      if (n.refs.empty()) dropped.insert(g);
    }
    for (NodeId c : consumers) {
      auto& deps = nodes[slot.at(c)].deps;
      std::erase_if(deps, [&](NodeId d) { return later.contains(d); });
      deps.push_back(kept);
    }
    if (!releases.empty()) {
      const NodeId survivor = releases.back();
      releases.pop_back();
      dropped.insert(releases.begin(), releases.end());
      Node& r = nodes[slot.at(survivor)];
      r.deps = consumers;
      r.deps.push_back(*step_end);
      r.phase = Phase::kUpdate;
      r.micro_step = graph.node(*step_end).micro_step;
      deferred.push_back(survivor);
    }
  }

  std::erase_if(nodes, [&](const Node& n) { return dropped.contains(n.id); });
  for (auto& n : nodes) {
    std::erase_if(n.deps, [&](NodeId d) { return dropped.contains(d); });
  }
  result.graph = graph.with_nodes(std::move(nodes));

  const std::unordered_set<NodeId> moving(deferred.begin(), deferred.end());
  for (NodeId id : schedule.order) {
    if (dropped.contains(id) || moving.contains(id)) continue;
    result.schedule.order.push_back(id);
    if (id == *step_end) {
      result.schedule.order.insert(result.schedule.order.end(),
                                   deferred.begin(), deferred.end());
    }
  }
  return result;
}

}  // namespace shardopt
