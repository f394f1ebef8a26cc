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

// Computation-graph IR: nodes annotated with costs, sharded parameters,
// optimizer-state fragments, and schedules (total orders over nodes).

#ifndef SHARDOPT_GRAPH_H_
#define SHARDOPT_GRAPH_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shardopt {

using NodeId = std::int64_t;
using ParamId = std::int64_t;
using FragmentId = std::int64_t;

enum class NodeKind {
  kCompute,
  kAllGather,
  kReduceScatter,
  kRelease,
  kOffloadStart,
  kReloadStart,
  kTransferSync,
  kOptimizerStep,
  kMarker,
};

enum class MarkerKind {
  kNone,
  kForwardBegin,
  kForwardEnd,
  kBackwardBegin,
  kBackwardEnd,
  kStepEnd,
};

enum class Phase { kNone, kForward, kBackward, kUpdate };

std::string_view NodeKindName(NodeKind kind);
std::string_view MarkerKindName(MarkerKind kind);
std::string_view PhaseName(Phase phase);
std::optional<NodeKind> ParseNodeKind(std::string_view name);
std::optional<MarkerKind> ParseMarkerKind(std::string_view name);
std::optional<Phase> ParsePhase(std::string_view name);

// True for kinds whose `refs` name optimizer-state fragments rather than
// parameters.
bool RefersToFragments(NodeKind kind);

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::kCompute;
  MarkerKind marker = MarkerKind::kNone;
  Phase phase = Phase::kNone;
  int micro_step = 0;
  // Compute and OptimizerStep only; transfer and collective durations come
  // from the cost model.
  std::int64_t duration_us = 0;
  // Allocated at node start, freed at node end.
  std::int64_t transient_bytes = 0;
  // Applied to resident memory at node completion.
  std::int64_t persistent_delta_bytes = 0;
  std::vector<NodeId> deps;  // sorted, unique
  // Parameter ids (Compute, AllGather, ReduceScatter, Release) or fragment
  // ids (OffloadStart, ReloadStart, TransferSync). A fused AllGather holds
  // several parameters; every other kind holds at most one.
  std::vector<std::int64_t> refs;

  bool operator==(const Node&) const = default;
};

struct Parameter {
  ParamId id = 0;
  std::int64_t size_bytes = 0;
  int shard_count = 1;

  std::int64_t sharded_bytes() const {
    return (size_bytes + shard_count - 1) / shard_count;
  }
  bool operator==(const Parameter&) const = default;
};

struct OptimizerStateFragment {
  FragmentId id = 0;
  std::int64_t size_bytes = 0;

  bool operator==(const OptimizerStateFragment&) const = default;
};

// Immutable after construction. The constructor checks id uniqueness,
// reference validity, per-kind field rules, and acyclicity, and throws
// Error(kInvalidInput) on any breach.
class Graph {
 public:
  Graph() = default;
  Graph(std::vector<Parameter> params,
        std::vector<OptimizerStateFragment> fragments,
        std::vector<Node> nodes);

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Parameter> params() const { return params_; }
  std::span<const OptimizerStateFragment> fragments() const {
    return fragments_;
  }

  bool contains(NodeId id) const { return node_index_.contains(id); }
  const Node& node(NodeId id) const;
  const Parameter& param(ParamId id) const;
  const OptimizerStateFragment& fragment(FragmentId id) const;
  bool has_param(ParamId id) const { return param_index_.contains(id); }

  // Smallest id strictly greater than every node id.
  NodeId next_id() const;

  // Kahn's algorithm; ties go to the smallest id.
  std::vector<NodeId> topological_order() const;

  // Bytes materialized by an all-gather over `node.refs`.
  std::int64_t gathered_bytes(const Node& node) const;

  std::int64_t total_param_bytes() const;
  std::int64_t total_fragment_bytes() const;

  // Returns a copy with the given replacements. Used by passes.
  Graph with_nodes(std::vector<Node> nodes) const;
  Graph with_params(std::vector<Parameter> params) const;

 private:
  std::vector<Parameter> params_;
  std::vector<OptimizerStateFragment> fragments_;
  std::vector<Node> nodes_;  // sorted by id
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<ParamId, std::size_t> param_index_;
  std::unordered_map<FragmentId, std::size_t> fragment_index_;
};

struct Schedule {
  std::vector<NodeId> order;
  // Names of the passes that produced this schedule, oldest first.
  std::vector<std::string> provenance;

  std::size_t size() const { return order.size(); }
  bool operator==(const Schedule&) const = default;
};

// Default schedule: the graph's smallest-id-first topological order.
Schedule InitialSchedule(const Graph& graph);

enum class ViolationKind { kMissingNode, kDuplicateNode, kUnknownNode, kDependencyInversion };

struct Violation {
  ViolationKind kind;
  NodeId node;
  // For kDependencyInversion, the dependency that was scheduled after (or
  // never before) `node`.
  std::optional<NodeId> dependency;

  bool operator==(const Violation&) const = default;
};

std::string_view ViolationKindName(ViolationKind kind);

// Empty iff `schedule` is a permutation of the graph's nodes that respects
// every dependency.
std::vector<Violation> validate(const Graph& graph, const Schedule& schedule);

struct Region {
  Phase phase = Phase::kNone;
  int micro_step = 0;

  auto operator<=>(const Region&) const = default;
};

struct UseSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const UseSpan&) const = default;
};

// Positions of the first and last Compute node consuming `param`, per
// (phase, micro-step) region. Throws Error(kUnusedParameter) if no Compute
// node references it.
std::map<Region, UseSpan> first_last_use(const Graph& graph,
                                         const Schedule& schedule,
                                         ParamId param);

// Schedule editing. Insertion throws Error(kDependencyViolation) when the
// insertion point precedes one of the node's dependencies or follows one of
// its dependents; every call throws Error(kInvalidInput) when the anchor or
// target is absent.
Schedule insert_before(const Graph& graph, const Schedule& schedule,
                       NodeId anchor, NodeId node);
Schedule insert_after(const Graph& graph, const Schedule& schedule,
                      NodeId anchor, NodeId node);
Schedule remove(const Schedule& schedule, NodeId node);

// Position of every scheduled node.
std::unordered_map<NodeId, std::size_t> PositionIndex(const Schedule& schedule);

}  // namespace shardopt

#endif  // SHARDOPT_GRAPH_H_
