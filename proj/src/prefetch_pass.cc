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

#include "shardopt/prefetch_pass.h"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>

namespace shardopt {
namespace {

// One entry of the schedule under construction: an untouched operator or a
// group of gathers issued together.
using Item = std::variant<NodeId, std::vector<NodeId>>;

enum class FlushReason { kCheck, kStrict, kDependency };

}  // namespace

std::string_view PrefetchActionName(PrefetchAction action) {
  switch (action) {
    case PrefetchAction::kGrouped:
      return "grouped";
    case PrefetchAction::kFlushed:
      return "flushed";
    case PrefetchAction::kEmitted:
      return "emitted";
    case PrefetchAction::kUnexamined:
      return "unexamined";
  }
  return "?";
}

std::vector<FusedGather> fuse(const Graph& graph, std::span<const NodeId> group,
                              const CostModel& cost, double alpha) {
  std::vector<FusedGather> out;
  for (NodeId id : group) {
    const std::int64_t bytes = graph.gathered_bytes(graph.node(id));
    if (!out.empty() && cost.should_fuse(out.back().bytes, bytes, alpha)) {
      out.back().members.push_back(id);
      out.back().bytes += bytes;
    } else {
      out.push_back({{id}, bytes, 0});
    }
  }
  return out;
}

PrefetchResult apply_prefetch(const Graph& graph, const Schedule& schedule,
                              const MemoryProfile& profile,
                              const ClusterConfig& cluster,
                              const CostModel& cost,
                              const PrefetchOptions& options) {
  if (!validate(graph, schedule).empty()) {
    throw Error(ErrorCode::kInvalidInput, "input schedule is invalid");
  }
  const auto& s0 = schedule.order;
  const std::int64_t limit = cluster.memory_limit_bytes;
  const std::int64_t group_limit = cluster.prefetch_limit_bytes;
  const bool strict = options.mode == PrefetchMode::kStrict;

  for (NodeId id : s0) profile.at(id);
  for (NodeId id : s0) {
    const Node& n = graph.node(id);
    if (n.kind != NodeKind::kAllGather) continue;
    if (profile.at(id) + graph.gathered_bytes(n) >= limit) {
      throw Error(ErrorCode::kInfeasibleBaseline,
                  "all-gather " + std::to_string(id) +
                      " exceeds the memory limit at its original position",
                  id);
    }
  }

  PrefetchResult result;
  PrefetchLog& log = result.log;
  std::vector<Item> reversed;
  std::vector<NodeId> pending;  // reverse-scan order
  std::int64_t pending_bytes = 0;
  std::unordered_set<NodeId> pending_deps;

  auto flush = [&](std::size_t position, FlushReason reason) {
    if (pending.empty()) return;
    std::vector<NodeId> members(pending.rbegin(), pending.rend());
    log.emissions.push_back({position, members, pending_bytes,
                             reason == FlushReason::kStrict,
                             reason == FlushReason::kDependency});
    reversed.emplace_back(std::move(members));
    pending.clear();
    pending_bytes = 0;
    pending_deps.clear();
  };

  for (std::size_t i = s0.size(); i-- > 1;) {
    const Node& op = graph.node(s0[i]);
    if (op.kind != NodeKind::kAllGather) {
      // A gather never moves above one of its own dependencies.
      if (pending_deps.contains(op.id)) {
        flush(i, FlushReason::kDependency);
      } else if (strict && !pending.empty() &&
                 profile.at(op.id) + op.transient_bytes + pending_bytes >= limit) {
        flush(i, FlushReason::kStrict);
      }
      reversed.emplace_back(op.id);
      continue;
    }

    const std::int64_t bytes = graph.gathered_bytes(op);
    const std::int64_t before_prev = profile.at(s0[i - 1]);
    auto try_admit = [&](PrefetchAction on_fail) {
      const std::int64_t group_bytes = pending_bytes + bytes;
      const std::int64_t checkpoint = before_prev + group_bytes;
      bool ok = checkpoint < limit && group_bytes < group_limit;
      if (strict) ok = ok && profile.at(op.id) + group_bytes < limit;
      log.decisions.push_back({op.id, ok ? PrefetchAction::kGrouped : on_fail,
                               group_bytes, checkpoint, i});
      if (ok) {
        pending.push_back(op.id);
        pending_bytes = group_bytes;
        pending_deps.insert(op.deps.begin(), op.deps.end());
      }
      return ok;
    };

    if (try_admit(pending.empty() ? PrefetchAction::kEmitted
                                  : PrefetchAction::kFlushed)) {
      continue;
    }
    if (!pending.empty()) {
      flush(i, FlushReason::kCheck);
      if (try_admit(PrefetchAction::kEmitted)) continue;
    }
    reversed.emplace_back(op.id);
    if (bytes >= group_limit) {
      result.warnings.push_back(
          {"OversizedGather",
           "all-gather " + std::to_string(op.id) +
               " alone exceeds the prefetch limit; left in place",
           op.id});
    }
  }
  if (!s0.empty()) {
    flush(0, FlushReason::kCheck);
    reversed.emplace_back(s0.front());
    if (graph.node(s0.front()).kind == NodeKind::kAllGather) {
      log.decisions.push_back({s0.front(), PrefetchAction::kUnexamined, 0, 0, 0});
    }
  }

  // Materialize fused collectives and rewire their consumers.
  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  std::unordered_map<NodeId, NodeId> replaced;
  std::vector<NodeId> removed;
  NodeId next = graph.next_id();
  Schedule& out = result.schedule;
  out.provenance = schedule.provenance;
  out.provenance.push_back(strict ? "prefetch(strict)" : "prefetch");
  out.order.reserve(s0.size());

  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
    if (const NodeId* id = std::get_if<NodeId>(&*it)) {
      out.order.push_back(*id);
      continue;
    }
    const auto& group = std::get<std::vector<NodeId>>(*it);
    for (FusedGather fg :
         fuse(graph, group, cost, cluster.fusion_threshold)) {
      if (fg.members.size() == 1) {
        out.order.push_back(fg.members.front());
        continue;
      }
      const Node& first = graph.node(fg.members.front());
      Node fused;
      fused.id = next++;
      fused.kind = NodeKind::kAllGather;
      fused.phase = first.phase;
      fused.micro_step = first.micro_step;
      for (NodeId m : fg.members) {
        const Node& member = graph.node(m);
        fused.refs.insert(fused.refs.end(), member.refs.begin(),
                          member.refs.end());
        fused.deps.insert(fused.deps.end(), member.deps.begin(),
                          member.deps.end());
        replaced[m] = fused.id;
        removed.push_back(m);
      }
      fg.node = fused.id;
      out.order.push_back(fused.id);
      nodes.push_back(std::move(fused));
      log.fusions.push_back(std::move(fg));
    }
  }

  if (!replaced.empty()) {
    std::sort(removed.begin(), removed.end());
    std::erase_if(nodes, [&](const Node& n) {
      return std::binary_search(removed.begin(), removed.end(), n.id);
    });
    for (auto& n : nodes) {
      for (auto& d : n.deps) {
        if (auto r = replaced.find(d); r != replaced.end()) d = r->second;
      }
      std::erase(n.deps, n.id);
    }
    result.graph = graph.with_nodes(std::move(nodes));
  } else {
    result.graph = graph;
  }
  return result;
}

}  // namespace shardopt
