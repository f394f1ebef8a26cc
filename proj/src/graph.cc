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

#include "shardopt/graph.h"

#include <algorithm>
#include <queue>
#include <string>
#include <unordered_set>
#include <utility>

#include "shardopt/error.h"

namespace shardopt {
namespace {

constexpr std::pair<NodeKind, std::string_view> kKindNames[] = {
    {NodeKind::kCompute, "compute"},
    {NodeKind::kAllGather, "all_gather"},
    {NodeKind::kReduceScatter, "reduce_scatter"},
    {NodeKind::kRelease, "release"},
    {NodeKind::kOffloadStart, "offload_start"},
    {NodeKind::kReloadStart, "reload_start"},
    {NodeKind::kTransferSync, "transfer_sync"},
    {NodeKind::kOptimizerStep, "optimizer_step"},
    {NodeKind::kMarker, "marker"},
};

constexpr std::pair<MarkerKind, std::string_view> kMarkerNames[] = {
    {MarkerKind::kNone, "none"},
    {MarkerKind::kForwardBegin, "forward_begin"},
    {MarkerKind::kForwardEnd, "forward_end"},
    {MarkerKind::kBackwardBegin, "backward_begin"},
    {MarkerKind::kBackwardEnd, "backward_end"},
    {MarkerKind::kStepEnd, "step_end"},
};

constexpr std::pair<Phase, std::string_view> kPhaseNames[] = {
    {Phase::kNone, "none"},
    {Phase::kForward, "forward"},
    {Phase::kBackward, "backward"},
    {Phase::kUpdate, "update"},
};

template <typename E, std::size_t N>
std::string_view NameOf(const std::pair<E, std::string_view> (&table)[N],
                        E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> Lookup(const std::pair<E, std::string_view> (&table)[N],
                        std::string_view name) {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  return std::nullopt;
}

[[noreturn]] void Invalid(const std::string& msg,
                          std::optional<NodeId> node = std::nullopt) {
  throw Error(ErrorCode::kInvalidInput, msg, node);
}

std::string NodeLabel(const Node& n) {
  return "node " + std::to_string(n.id) + " (" +
         std::string(NodeKindName(n.kind)) + ")";
}

}  // namespace

std::string_view NodeKindName(NodeKind kind) { return NameOf(kKindNames, kind); }
std::string_view MarkerKindName(MarkerKind kind) {
  return NameOf(kMarkerNames, kind);
}
std::string_view PhaseName(Phase phase) { return NameOf(kPhaseNames, phase); }
std::optional<NodeKind> ParseNodeKind(std::string_view name) {
  return Lookup(kKindNames, name);
}
std::optional<MarkerKind> ParseMarkerKind(std::string_view name) {
  return Lookup(kMarkerNames, name);
}
std::optional<Phase> ParsePhase(std::string_view name) {
  return Lookup(kPhaseNames, name);
}

bool RefersToFragments(NodeKind kind) {
  return kind == NodeKind::kOffloadStart || kind == NodeKind::kReloadStart ||
         kind == NodeKind::kTransferSync;
}

std::string_view ViolationKindName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kMissingNode:
      return "missing_node";
    case ViolationKind::kDuplicateNode:
      return "duplicate_node";
    case ViolationKind::kUnknownNode:
      return "unknown_node";
    case ViolationKind::kDependencyInversion:
      return "dependency_inversion";
  }
  return "?";
}

Graph::Graph(std::vector<Parameter> params,
             std::vector<OptimizerStateFragment> fragments,
             std::vector<Node> nodes)
    : params_(std::move(params)),
      fragments_(std::move(fragments)),
      nodes_(std::move(nodes)) {
  std::sort(params_.begin(), params_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(fragments_.begin(), fragments_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(nodes_.begin(), nodes_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (p.size_bytes <= 0) {
      Invalid("parameter " + std::to_string(p.id) + " has size_bytes <= 0");
    }
    if (p.shard_count < 1) {
      Invalid("parameter " + std::to_string(p.id) + " has shard_count < 1");
    }
    if (!param_index_.emplace(p.id, i).second) {
      Invalid("duplicate parameter id " + std::to_string(p.id));
    }
  }
  for (std::size_t i = 0; i < fragments_.size(); ++i) {
    const auto& f = fragments_[i];
    if (f.size_bytes <= 0) {
      Invalid("optimizer fragment " + std::to_string(f.id) +
              " has size_bytes <= 0");
    }
    if (!fragment_index_.emplace(f.id, i).second) {
      Invalid("duplicate optimizer fragment id " + std::to_string(f.id));
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_index_.emplace(nodes_[i].id, i).second) {
      Invalid("duplicate node id " + std::to_string(nodes_[i].id),
              nodes_[i].id);
    }
  }

  for (auto& n : nodes_) {
    std::sort(n.deps.begin(), n.deps.end());
    n.deps.erase(std::unique(n.deps.begin(), n.deps.end()), n.deps.end());
    for (NodeId d : n.deps) {
      if (d == n.id) Invalid(NodeLabel(n) + " depends on itself", n.id);
      if (!contains(d)) {
        Invalid(NodeLabel(n) + " depends on unknown node " + std::to_string(d),
                n.id);
      }
    }
    if (n.micro_step < 0) Invalid(NodeLabel(n) + " has micro_step < 0", n.id);
    if (n.duration_us < 0 || n.transient_bytes < 0) {
      Invalid(NodeLabel(n) + " has a negative duration or transient size",
              n.id);
    }
    if ((n.kind == NodeKind::kMarker) != (n.marker != MarkerKind::kNone)) {
      Invalid(NodeLabel(n) + " marker kind does not match node kind", n.id);
    }

    const bool carries_cost = n.kind == NodeKind::kCompute ||
                              n.kind == NodeKind::kOptimizerStep;
    if (!carries_cost && (n.duration_us != 0 || n.transient_bytes != 0 ||
                          n.persistent_delta_bytes != 0)) {
      Invalid(NodeLabel(n) + " may not carry duration or memory annotations",
              n.id);
    }

    for (auto ref : n.refs) {
      if (RefersToFragments(n.kind) ? !fragment_index_.contains(ref)
                                    : !param_index_.contains(ref)) {
        Invalid(NodeLabel(n) + " references unknown id " + std::to_string(ref),
                n.id);
      }
    }
    switch (n.kind) {
      case NodeKind::kAllGather:
        if (n.refs.empty()) Invalid(NodeLabel(n) + " gathers nothing", n.id);
        break;
      case NodeKind::kRelease:
      case NodeKind::kOffloadStart:
      case NodeKind::kReloadStart:
      case NodeKind::kTransferSync:
        if (n.refs.size() != 1) {
          Invalid(NodeLabel(n) + " must reference exactly one tensor", n.id);
        }
        break;
      case NodeKind::kCompute:
        if (n.refs.size() > 1) {
          Invalid(NodeLabel(n) + " may consume at most one parameter", n.id);
        }
        break;
      case NodeKind::kReduceScatter:
        break;
      case NodeKind::kOptimizerStep:
      case NodeKind::kMarker:
        if (!n.refs.empty()) {
          Invalid(NodeLabel(n) + " may not reference tensors", n.id);
        }
        break;
    }
    if (n.kind == NodeKind::kTransferSync) {
      bool has_transfer = false;
      for (NodeId d : n.deps) {
        const Node& dep = node(d);
        if ((dep.kind == NodeKind::kOffloadStart ||
             dep.kind == NodeKind::kReloadStart) &&
            dep.refs == n.refs) {
          has_transfer = true;
        }
      }
      if (!has_transfer) {
        Invalid(NodeLabel(n) + " does not depend on a transfer of its fragment",
                n.id);
      }
    }
  }

  if (topological_order().size() != nodes_.size()) {
    Invalid("node dependencies contain a cycle");
  }
}

const Node& Graph::node(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) Invalid("unknown node " + std::to_string(id));
  return nodes_[it->second];
}

const Parameter& Graph::param(ParamId id) const {
  auto it = param_index_.find(id);
  if (it == param_index_.end()) {
    Invalid("unknown parameter " + std::to_string(id));
  }
  return params_[it->second];
}

const OptimizerStateFragment& Graph::fragment(FragmentId id) const {
  auto it = fragment_index_.find(id);
  if (it == fragment_index_.end()) {
    Invalid("unknown optimizer fragment " + std::to_string(id));
  }
  return fragments_[it->second];
}

NodeId Graph::next_id() const {
  return nodes_.empty() ? 0 : nodes_.back().id + 1;
}

std::vector<NodeId> Graph::topological_order() const {
  std::unordered_map<NodeId, std::size_t> pending;
  std::unordered_map<NodeId, std::vector<NodeId>> users;
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& n : nodes_) {
    pending[n.id] = n.deps.size();
    for (NodeId d : n.deps) users[d].push_back(n.id);
    if (n.deps.empty()) ready.push(n.id);
  }
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId u : users[id]) {
      if (--pending[u] == 0) ready.push(u);
    }
  }
  return order;
}

std::int64_t Graph::gathered_bytes(const Node& node) const {
  std::int64_t total = 0;
  for (auto ref : node.refs) total += param(ref).size_bytes;
  return total;
}

std::int64_t Graph::total_param_bytes() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += p.size_bytes;
  return total;
}

std::int64_t Graph::total_fragment_bytes() const {
  std::int64_t total = 0;
  for (const auto& f : fragments_) total += f.size_bytes;
  return total;
}

Graph Graph::with_nodes(std::vector<Node> nodes) const {
  return Graph(params_, fragments_, std::move(nodes));
}

Graph Graph::with_params(std::vector<Parameter> params) const {
  return Graph(std::move(params), fragments_, nodes_);
}

Schedule InitialSchedule(const Graph& graph) {
  return Schedule{graph.topological_order(), {}};
}

std::unordered_map<NodeId, std::size_t> PositionIndex(
    const Schedule& schedule) {
  std::unordered_map<NodeId, std::size_t> pos;
  pos.reserve(schedule.order.size());
  for (std::size_t i = 0; i < schedule.order.size(); ++i) {
    pos.emplace(schedule.order[i], i);
  }
  return pos;
}

std::vector<Violation> validate(const Graph& graph, const Schedule& schedule) {
  std::vector<Violation> out;
  std::unordered_map<NodeId, std::size_t> pos;
  for (std::size_t i = 0; i < schedule.order.size(); ++i) {
    NodeId id = schedule.order[i];
    if (!graph.contains(id)) {
      out.push_back({ViolationKind::kUnknownNode, id, std::nullopt});
      continue;
    }
    if (!pos.emplace(id, i).second) {
      out.push_back({ViolationKind::kDuplicateNode, id, std::nullopt});
    }
  }
  for (const auto& n : graph.nodes()) {
    if (!pos.contains(n.id)) {
      out.push_back({ViolationKind::kMissingNode, n.id, std::nullopt});
    }
  }
  for (std::size_t i = 0; i < schedule.order.size(); ++i) {
    NodeId id = schedule.order[i];
    auto self = pos.find(id);
    if (self == pos.end() || self->second != i) continue;
    for (NodeId d : graph.node(id).deps) {
      auto it = pos.find(d);
      if (it != pos.end() && it->second > i) {
        out.push_back({ViolationKind::kDependencyInversion, id, d});
      }
    }
  }
  return out;
}

std::map<Region, UseSpan> first_last_use(const Graph& graph,
                                         const Schedule& schedule,
                                         ParamId param) {
  std::map<Region, UseSpan> spans;
  for (std::size_t i = 0; i < schedule.order.size(); ++i) {
    const Node& n = graph.node(schedule.order[i]);
    if (n.kind != NodeKind::kCompute || n.refs.empty() || n.refs[0] != param) {
      continue;
    }
    Region region{n.phase, n.micro_step};
    auto [it, inserted] = spans.try_emplace(region, UseSpan{i, i});
    if (!inserted) it->second.last = i;
  }
  if (spans.empty()) {
    throw Error(ErrorCode::kUnusedParameter,
                "parameter " + std::to_string(param) +
                    " is not consumed by any compute node");
  }
  return spans;
}

namespace {

Schedule InsertAt(const Graph& graph, const Schedule& schedule,
                  std::size_t index, NodeId node) {
  const Node& n = graph.node(node);
  for (NodeId s : schedule.order) {
    if (s == node) Invalid("node " + std::to_string(node) + " already scheduled");
  }
  std::unordered_set<NodeId> before(schedule.order.begin(),
                                    schedule.order.begin() + index);
  for (NodeId d : n.deps) {
    if (!before.contains(d)) {
      throw Error(ErrorCode::kDependencyViolation,
                  "insertion point precedes dependency " + std::to_string(d) +
                      " of node " + std::to_string(node),
                  node);
    }
  }
  for (std::size_t i = 0; i < index; ++i) {
    const auto& deps = graph.node(schedule.order[i]).deps;
    if (std::binary_search(deps.begin(), deps.end(), node)) {
      throw Error(ErrorCode::kDependencyViolation,
                  "insertion point follows dependent " +
                      std::to_string(schedule.order[i]) + " of node " +
                      std::to_string(node),
                  node);
    }
  }
  Schedule out = schedule;
  out.order.insert(out.order.begin() + static_cast<std::ptrdiff_t>(index), node);
  return out;
}

std::size_t IndexOf(const Schedule& schedule, NodeId id) {
  auto it = std::find(schedule.order.begin(), schedule.order.end(), id);
  if (it == schedule.order.end()) {
    Invalid("node " + std::to_string(id) + " is not in the schedule", id);
  }
  return static_cast<std::size_t>(it - schedule.order.begin());
}

}  // namespace

Schedule insert_before(const Graph& graph, const Schedule& schedule,
                       NodeId anchor, NodeId node) {
  return InsertAt(graph, schedule, IndexOf(schedule, anchor), node);
}

Schedule insert_after(const Graph& graph, const Schedule& schedule,
                      NodeId anchor, NodeId node) {
  return InsertAt(graph, schedule, IndexOf(schedule, anchor) + 1, node);
}

Schedule remove(const Schedule& schedule, NodeId node) {
  Schedule out = schedule;
  out.order.erase(out.order.begin() +
                  static_cast<std::ptrdiff_t>(IndexOf(schedule, node)));
  return out;
}

}  // namespace shardopt
