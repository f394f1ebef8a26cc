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

#include "shardopt/offload_pass.h"

#include <algorithm>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>

namespace shardopt {
namespace {

void RequireValid(const Graph& graph, const Schedule& schedule) {
  if (!validate(graph, schedule).empty()) {
    throw Error(ErrorCode::kInvalidInput, "input schedule is invalid");
  }
}

Node TransferNode(NodeId id, NodeKind kind, FragmentId fragment, Phase phase,
                  int micro_step, std::vector<NodeId> deps) {
  Node n;
  n.id = id;
  n.kind = kind;
  n.phase = phase;
  n.micro_step = micro_step;
  n.refs = {fragment};
  n.deps = std::move(deps);
  return n;
}

std::optional<std::size_t> FindOptimizerStep(const Graph& graph,
                                             const Schedule& schedule) {
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (graph.node(schedule.order[i]).kind == NodeKind::kOptimizerStep) return i;
  }
  return std::nullopt;
}

}  // namespace

std::string_view OffloadEventKindName(OffloadEventKind kind) {
  switch (kind) {
    case OffloadEventKind::kOffload:
      return "offload";
    case OffloadEventKind::kCheck:
      return "check";
    case OffloadEventKind::kSync:
      return "sync";
    case OffloadEventKind::kReload:
      return "reload";
    case OffloadEventKind::kReloadSync:
      return "reload_sync";
    case OffloadEventKind::kFallback:
      return "fallback";
  }
  return "?";
}

OffloadResult apply_offload_forward(
    const Graph& graph, const Schedule& schedule, const MemoryProfile& profile,
    std::span<const OptimizerStateFragment> fragments,
    const ClusterConfig& cluster) {
  RequireValid(graph, schedule);
  for (NodeId id : schedule.order) profile.across_at(id);

  OffloadResult result;
  result.schedule.provenance = schedule.provenance;
  result.schedule.provenance.push_back("offload");
  const std::int64_t limit = cluster.memory_limit_bytes;

  auto base = [&](NodeId id) { return profile.across_at(id) - profile.optimizer_bytes; };
  std::int64_t m_peak = 0;
  for (NodeId id : schedule.order) m_peak = std::max(m_peak, base(id));
  std::int64_t m_opt = 0;
  if (profile.optimizer_allocated) {
    for (const auto& f : fragments) m_opt += f.size_bytes;
  }
  result.peak_bytes = m_peak;
  result.optimizer_bytes = m_opt;

  std::int64_t offloaded_bytes = 0;
  std::vector<const OptimizerStateFragment*> chosen;
  if (m_opt > 0) {
    for (const auto& f : fragments) {
      if (m_peak + m_opt - offloaded_bytes > limit) {
        chosen.push_back(&f);
        offloaded_bytes += f.size_bytes;
      }
    }
  }
  if (offloaded_bytes > cluster.host_memory_bytes) {
    throw Error(ErrorCode::kInsufficientHostCapacity,
                "offloading " + std::to_string(offloaded_bytes) +
                    " bytes exceeds host memory of " +
                    std::to_string(cluster.host_memory_bytes));
  }

  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  NodeId next = graph.next_id();
  std::unordered_map<FragmentId, NodeId> offload_node;
  auto& order = result.schedule.order;
  const NodeId anchor = schedule.order.empty() ? 0 : schedule.order.front();
  for (const auto* f : chosen) {
    Node n = TransferNode(next++, NodeKind::kOffloadStart, f->id,
                          Phase::kForward, 0, {});
    offload_node[f->id] = n.id;
    order.push_back(n.id);
    result.offloaded.push_back(f->id);
    result.log.push_back({OffloadEventKind::kOffload, f->id, 0, anchor,
                          0, 0, 0});
    nodes.push_back(std::move(n));
  }

  std::deque<const OptimizerStateFragment*> queue(chosen.begin(), chosen.end());
  std::int64_t freed = 0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Node& op = graph.node(schedule.order[i]);
    const std::int64_t p = base(op.id);
    while (p + m_opt - freed > limit) {
      if (queue.empty()) {
        throw Error(ErrorCode::kInfeasible,
                    "operator " + std::to_string(op.id) +
                        " exceeds the memory limit even with every optimizer "
                        "fragment offloaded",
                    op.id);
      }
      const auto* f = queue.front();
      queue.pop_front();
      Node sync = TransferNode(next++, NodeKind::kTransferSync, f->id, op.phase,
                               op.micro_step, {offload_node.at(f->id)});
      order.push_back(sync.id);
      nodes.push_back(std::move(sync));
      freed += f->size_bytes;
      result.log.push_back(
          {OffloadEventKind::kSync, f->id, i, op.id, p, freed, 0});
    }
    result.log.push_back(
        {OffloadEventKind::kCheck, std::nullopt, i, op.id, p, freed, 0});
    order.push_back(op.id);
  }

  result.graph = chosen.empty() ? graph : graph.with_nodes(std::move(nodes));
  return result;
}

OffloadResult apply_reload_backward(const Graph& graph,
                                    const Schedule& schedule,
                                    const MemoryProfile& profile,
                                    std::span<const FragmentId> offloaded,
                                    const ClusterConfig& cluster) {
  RequireValid(graph, schedule);
  OffloadResult result;
  result.offloaded.assign(offloaded.begin(), offloaded.end());
  result.schedule.provenance = schedule.provenance;
  result.schedule.provenance.push_back("reload");
  if (offloaded.empty()) {
    result.graph = graph;
    result.schedule.order = schedule.order;
    return result;
  }
  for (NodeId id : schedule.order) profile.across_at(id);

  const auto step = FindOptimizerStep(graph, schedule);
  if (!step) {
    throw Error(ErrorCode::kMissingStepMarker,
                "no optimizer step to reload optimizer states for");
  }
  const auto& s = schedule.order;
  std::size_t window = 0;
  std::unordered_map<FragmentId, std::size_t> offload_sync;
  std::unordered_map<FragmentId, NodeId> offload_sync_node;
  for (std::size_t i = 0; i < *step; ++i) {
    const Node& n = graph.node(s[i]);
    if (n.marker == MarkerKind::kBackwardBegin) window = i;
    if (n.kind == NodeKind::kTransferSync && EndRelease(graph, n) > 0) {
      offload_sync[n.refs.front()] = i;
      offload_sync_node[n.refs.front()] = n.id;
    }
  }

  // suffix_max[k] = max residency across the operators at positions [k, step).
  std::vector<std::int64_t> suffix_max(*step + 1, INT64_MIN);
  for (std::size_t k = *step; k-- > 0;) {
    suffix_max[k] = std::max(suffix_max[k + 1], profile.across_at(s[k]));
  }

  const std::int64_t limit = cluster.memory_limit_bytes;
  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  NodeId next = graph.next_id();
  // Reloads to insert before each position, in insertion order.
  std::map<std::size_t, std::vector<NodeId>> insert_before;
  std::vector<NodeId> syncs;
  std::vector<FragmentId> synced;
  std::size_t cursor = window;
  std::int64_t reloaded = 0;

  for (auto it = offloaded.rbegin(); it != offloaded.rend(); ++it) {
    const FragmentId f = *it;
    auto sync_pos = offload_sync.find(f);
    if (sync_pos == offload_sync.end()) {
      result.warnings.push_back(
          {"NeverFreed",
           "optimizer fragment " + std::to_string(f) +
               " was never freed on device; no reload needed",
           std::nullopt});
      continue;
    }
    reloaded += graph.fragment(f).size_bytes;
    std::size_t pos = std::max(cursor, sync_pos->second + 1);
    while (pos < *step && suffix_max[pos] + reloaded > limit) ++pos;
    const bool fallback = pos >= *step;
    if (fallback) {
      pos = *step;
      result.warnings.push_back(
          {"ReloadInfeasible",
           "optimizer fragment " + std::to_string(f) +
               " has no headroom before the optimizer step; reloading "
               "synchronously",
           s[*step]});
    }
    const Node& anchor = graph.node(s[pos]);
    Node reload = TransferNode(next++, NodeKind::kReloadStart, f,
                               fallback ? Phase::kUpdate : anchor.phase,
                               anchor.micro_step, {offload_sync_node.at(f)});
    Node sync = TransferNode(next++, NodeKind::kTransferSync, f, Phase::kUpdate,
                             anchor.micro_step, {reload.id});
    insert_before[pos].push_back(reload.id);
    syncs.push_back(sync.id);
    synced.push_back(f);
    result.log.push_back({fallback ? OffloadEventKind::kFallback
                                   : OffloadEventKind::kReload,
                          f, pos, anchor.id,
                          pos < *step ? profile.across_at(s[pos]) : 0, 0, reloaded});
    nodes.push_back(std::move(reload));
    nodes.push_back(std::move(sync));
    cursor = pos;
  }
  for (FragmentId f : synced) {
    result.log.push_back({OffloadEventKind::kReloadSync, f, *step,
                          s[*step], 0, 0, reloaded});
  }

  for (auto& n : nodes) {
    if (n.id == s[*step]) n.deps.insert(n.deps.end(), syncs.begin(), syncs.end());
  }
  result.graph = graph.with_nodes(std::move(nodes));
  auto& order = result.schedule.order;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (auto ins = insert_before.find(i); ins != insert_before.end()) {
      order.insert(order.end(), ins->second.begin(), ins->second.end());
    }
    if (i == *step) order.insert(order.end(), syncs.begin(), syncs.end());
    order.push_back(s[i]);
  }
  return result;
}

OffloadResult synchronous_offload(const Graph& graph, const Schedule& schedule,
                                  std::span<const FragmentId> offloaded) {
  RequireValid(graph, schedule);
  OffloadResult result;
  result.offloaded.assign(offloaded.begin(), offloaded.end());
  result.schedule.provenance = schedule.provenance;
  result.schedule.provenance.push_back("offload(sync)");
  if (offloaded.empty()) {
    result.graph = graph;
    result.schedule.order = schedule.order;
    return result;
  }
  const auto step = FindOptimizerStep(graph, schedule);
  if (!step) {
    throw Error(ErrorCode::kMissingStepMarker,
                "no optimizer step to reload optimizer states for");
  }
  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  NodeId next = graph.next_id();
  std::vector<NodeId> front, front_syncs, back, back_syncs;
  for (FragmentId f : offloaded) {
    Node off = TransferNode(next++, NodeKind::kOffloadStart, f, Phase::kForward,
                            0, {});
    Node off_sync = TransferNode(next++, NodeKind::kTransferSync, f,
                                 Phase::kForward, 0, {off.id});
    Node reload = TransferNode(next++, NodeKind::kReloadStart, f,
                               Phase::kUpdate, 0, {off_sync.id});
    Node reload_sync = TransferNode(next++, NodeKind::kTransferSync, f,
                                    Phase::kUpdate, 0, {reload.id});
    front.push_back(off.id);
    front_syncs.push_back(off_sync.id);
    back.push_back(reload.id);
    back_syncs.push_back(reload_sync.id);
    for (Node* n : {&off, &off_sync, &reload, &reload_sync}) {
      nodes.push_back(std::move(*n));
    }
  }
  const NodeId step_id = schedule.order[*step];
  for (auto& n : nodes) {
    if (n.id == step_id) {
      n.deps.insert(n.deps.end(), back_syncs.begin(), back_syncs.end());
    }
  }
  result.graph = graph.with_nodes(std::move(nodes));
  auto& order = result.schedule.order;
  order = front;
  order.insert(order.end(), front_syncs.begin(), front_syncs.end());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i == *step) {
      order.insert(order.end(), back.begin(), back.end());
      order.insert(order.end(), back_syncs.begin(), back_syncs.end());
    }
    order.push_back(schedule.order[i]);
  }
  return result;
}

}  // namespace shardopt
