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

#include "shardopt/shard_pass.h"

#include <algorithm>
#include <map>
#include <optional>
#include <string>

namespace shardopt {
namespace {

void RequireValid(const Graph& graph, const Schedule& schedule) {
  if (!validate(graph, schedule).empty()) {
    throw Error(ErrorCode::kInvalidInput, "input schedule is invalid");
  }
}

}  // namespace

PassResult apply_sharding(const Graph& graph, const Schedule& schedule,
                          const ClusterConfig& cluster) {
  RequireValid(graph, schedule);
  for (const auto& n : graph.nodes()) {
    if (n.kind == NodeKind::kAllGather || n.kind == NodeKind::kRelease) {
      throw Error(ErrorCode::kAlreadySharded,
                  "graph already contains gather/release node " +
                      std::to_string(n.id),
                  n.id);
    }
  }

  PassResult result;
  std::vector<Node> nodes(graph.nodes().begin(), graph.nodes().end());
  std::unordered_map<NodeId, std::size_t> slot;
  for (std::size_t i = 0; i < nodes.size(); ++i) slot[nodes[i].id] = i;

  const auto pos = PositionIndex(schedule);
  // Keyed by schedule position of the first/last consumer.
  std::map<std::size_t, NodeId> gather_before;
  std::map<std::size_t, NodeId> release_after;

  NodeId next = graph.next_id();
  for (const auto& p : graph.params()) {
    std::map<Region, std::vector<NodeId>> consumers;
    for (NodeId id : schedule.order) {
      const Node& n = graph.node(id);
      if (n.kind == NodeKind::kCompute && !n.refs.empty() &&
          n.refs.front() == p.id) {
        consumers[{n.phase, n.micro_step}].push_back(id);
      }
    }
    if (consumers.empty()) {
      result.warnings.push_back(
          {"UnusedParameter",
           "parameter " + std::to_string(p.id) + " has no consumer",
           std::nullopt});
      continue;
    }
    // Regions in schedule order; regions whose consumer spans interleave
    // share one gathered buffer.
    struct Span {
      Region region;
      std::vector<NodeId> users;
    };
    std::vector<Span> spans;
    for (auto& [region, users] : consumers) spans.push_back({region, users});
    std::sort(spans.begin(), spans.end(), [&](const Span& a, const Span& b) {
      return pos.at(a.users.front()) < pos.at(b.users.front());
    });
    std::vector<Span> merged;
    for (auto& span : spans) {
      if (!merged.empty() &&
          pos.at(span.users.front()) < pos.at(merged.back().users.back())) {
        auto& users = merged.back().users;
        users.insert(users.end(), span.users.begin(), span.users.end());
        std::sort(users.begin(), users.end(), [&](NodeId a, NodeId b) {
          return pos.at(a) < pos.at(b);
        });
      } else {
        merged.push_back(std::move(span));
      }
    }

    std::optional<NodeId> previous_release;
    for (const auto& [region, users] : merged) {
      Node gather;
      gather.id = next++;
      gather.kind = NodeKind::kAllGather;
      gather.phase = region.phase;
      gather.micro_step = region.micro_step;
      gather.refs = {p.id};
      // The buffer is reused: regather only after the previous release.
      if (previous_release) gather.deps = {*previous_release};

      Node release;
      release.id = next++;
      release.kind = NodeKind::kRelease;
      release.phase = region.phase;
      release.micro_step = region.micro_step;
      release.refs = {p.id};
      release.deps = users;
      previous_release = release.id;

      for (NodeId u : users) nodes[slot.at(u)].deps.push_back(gather.id);
      gather_before.emplace(pos.at(users.front()), gather.id);
      release_after.emplace(pos.at(users.back()), release.id);
      nodes.push_back(std::move(gather));
      nodes.push_back(std::move(release));
    }
  }

  std::vector<Parameter> params(graph.params().begin(), graph.params().end());
  for (auto& p : params) p.shard_count = cluster.device_count;

  result.graph = Graph(std::move(params),
                       {graph.fragments().begin(), graph.fragments().end()},
                       std::move(nodes));
  result.schedule.provenance = schedule.provenance;
  result.schedule.provenance.push_back("shard");
  result.schedule.order.reserve(result.graph.nodes().size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (auto it = gather_before.find(i); it != gather_before.end()) {
      result.schedule.order.push_back(it->second);
    }
    result.schedule.order.push_back(schedule.order[i]);
    if (auto it = release_after.find(i); it != release_after.end()) {
      result.schedule.order.push_back(it->second);
    }
  }
  return result;
}

}  // namespace shardopt
