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

#include "test_support.h"

#include <algorithm>
#include <map>
#include <set>

namespace shardopt::testing {

CostModel DefaultCost() { return CostModel(100.0, 40e9, 10.0, 20e9); }

ClusterConfig Budget(std::int64_t memory_limit, std::int64_t prefetch_limit,
                     int device_count) {
  ClusterConfig c;
  c.device_count = device_count;
  c.device_memory_bytes = std::max<std::int64_t>(memory_limit, 1) * 2;
  c.memory_limit_bytes = memory_limit;
  c.prefetch_limit_bytes = prefetch_limit;
  return c;
}

Graph BuildLayered(const LayeredSpec& spec) {
  const int layers = static_cast<int>(spec.param_bytes.size());
  auto at = [](const std::vector<std::int64_t>& v, int l) {
    return v.empty() ? 0 : v[static_cast<std::size_t>(l)];
  };
  std::vector<Parameter> params;
  for (int l = 0; l < layers; ++l) params.push_back({l, spec.param_bytes[l], 1});
  std::vector<OptimizerStateFragment> fragments;
  if (spec.fragment_bytes > 0 && !spec.forward_only) {
    for (int f = 0; f < spec.fragment_count; ++f) {
      fragments.push_back({f, spec.fragment_bytes});
    }
  }

  std::vector<Node> nodes;
  NodeId prev = -1;
  auto emit = [&](Node n) {
    n.id = static_cast<NodeId>(nodes.size());
    if (prev >= 0) n.deps.push_back(prev);
    prev = n.id;
    nodes.push_back(std::move(n));
    return prev;
  };
  auto marker = [&](MarkerKind kind, Phase phase, int step) {
    Node n;
    n.kind = NodeKind::kMarker;
    n.marker = kind;
    n.phase = phase;
    n.micro_step = step;
    emit(std::move(n));
  };

  for (int m = 0; m < spec.accumulation_steps; ++m) {
    std::vector<NodeId> forward(layers);
    marker(MarkerKind::kForwardBegin, Phase::kForward, m);
    for (int l = 0; l < layers; ++l) {
      Node n;
      n.phase = Phase::kForward;
      n.micro_step = m;
      n.duration_us = std::max<std::int64_t>(at(spec.compute_us, l), 1);
      n.transient_bytes = at(spec.transient_bytes, l);
      n.persistent_delta_bytes = spec.forward_only ? 0 : at(spec.activation_bytes, l);
      n.refs = {l};
      forward[l] = emit(std::move(n));
    }
    marker(MarkerKind::kForwardEnd, Phase::kForward, m);
    if (spec.forward_only) break;
    marker(MarkerKind::kBackwardBegin, Phase::kBackward, m);
    for (int l = layers - 1; l >= 0; --l) {
      Node n;
      n.phase = Phase::kBackward;
      n.micro_step = m;
      n.duration_us = 2 * std::max<std::int64_t>(at(spec.compute_us, l), 1);
      n.transient_bytes = at(spec.transient_bytes, l);
      n.persistent_delta_bytes = -at(spec.activation_bytes, l);
      n.refs = {l};
      n.deps.push_back(forward[l]);
      emit(std::move(n));
    }
    marker(MarkerKind::kBackwardEnd, Phase::kBackward, m);
  }
  if (!spec.forward_only) {
    Node step;
    step.kind = NodeKind::kOptimizerStep;
    step.phase = Phase::kUpdate;
    step.micro_step = spec.accumulation_steps - 1;
    step.duration_us = 1000;
    emit(std::move(step));
    marker(MarkerKind::kStepEnd, Phase::kUpdate, spec.accumulation_steps - 1);
  }
  return Graph(std::move(params), std::move(fragments), std::move(nodes));
}

LayeredSpec RandomLayeredSpec(std::mt19937_64& rng) {
  auto uniform = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  LayeredSpec spec;
  const int layers = static_cast<int>(uniform(1, 8));
  for (int l = 0; l < layers; ++l) {
    spec.param_bytes.push_back(uniform(1, 64) * kMB);
    spec.compute_us.push_back(uniform(500, 20'000));
    spec.activation_bytes.push_back(uniform(0, 32) * kMB);
    spec.transient_bytes.push_back(uniform(0, 8) * kMB);
  }
  spec.accumulation_steps = static_cast<int>(uniform(1, 3));
  spec.fragment_count = static_cast<int>(uniform(1, 8));
  spec.fragment_bytes = uniform(1, 48) * kMB;
  spec.forward_only = uniform(0, 9) == 0;
  return spec;
}

Graph RandomDag(std::mt19937_64& rng, int max_compute) {
  auto uniform = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  const int n = static_cast<int>(uniform(1, max_compute));
  const int param_count = static_cast<int>(uniform(1, std::max(1, n / 2 + 1)));
  std::vector<Parameter> params;
  for (int p = 0; p < param_count; ++p) params.push_back({p, uniform(1, 32) * kMB, 1});

  std::vector<Node> nodes;
  std::vector<bool> has_dependent(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    Node c;
    c.id = i;
    c.phase = uniform(0, 1) ? Phase::kForward : Phase::kBackward;
    c.duration_us = uniform(100, 10'000);
    c.transient_bytes = uniform(0, 4) * kMB;
    if (uniform(0, 9) < 7) c.refs = {uniform(0, param_count - 1)};
    const int fan_in = static_cast<int>(uniform(0, std::min(i, 3)));
    for (int k = 0; k < fan_in; ++k) {
      const auto d = uniform(0, i - 1);
      c.deps.push_back(d);
      has_dependent[static_cast<std::size_t>(d)] = true;
    }
    nodes.push_back(std::move(c));
  }
  Node step;
  step.id = n;
  step.kind = NodeKind::kOptimizerStep;
  step.phase = Phase::kUpdate;
  step.duration_us = uniform(100, 2'000);
  for (int i = 0; i < n; ++i) {
    if (!has_dependent[static_cast<std::size_t>(i)]) step.deps.push_back(i);
  }
  nodes.push_back(step);
  Node end;
  end.id = n + 1;
  end.kind = NodeKind::kMarker;
  end.marker = MarkerKind::kStepEnd;
  end.phase = Phase::kUpdate;
  end.deps = {n};
  nodes.push_back(end);

  std::vector<OptimizerStateFragment> fragments;
  const int fragment_count = static_cast<int>(uniform(0, 4));
  for (int f = 0; f < fragment_count; ++f) fragments.push_back({f, uniform(1, 32) * kMB});
  return Graph(std::move(params), std::move(fragments), std::move(nodes));
}

Schedule RandomTopologicalSchedule(const Graph& graph, std::mt19937_64& rng) {
  std::map<NodeId, int> indegree;
  std::map<NodeId, std::vector<NodeId>> dependents;
  for (const auto& n : graph.nodes()) {
    indegree[n.id] += 0;
    for (NodeId d : n.deps) {
      ++indegree[n.id];
      dependents[d].push_back(n.id);
    }
  }
  std::vector<NodeId> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push_back(id);
  }
  Schedule s;
  while (!ready.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
    const std::size_t k = pick(rng);
    const NodeId id = ready[k];
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(k));
    s.order.push_back(id);
    for (NodeId t : dependents[id]) {
      if (--indegree[t] == 0) ready.push_back(t);
    }
  }
  return s;
}

std::vector<std::string> CheckPlacement(const Graph& graph,
                                        const Schedule& schedule) {
  std::set<ParamId> sharded;
  for (const auto& n : graph.nodes()) {
    if (n.kind == NodeKind::kAllGather) sharded.insert(n.refs.begin(), n.refs.end());
  }
  std::vector<std::string> problems;
  std::set<ParamId> gathered;
  for (NodeId id : schedule.order) {
    const Node& n = graph.node(id);
    const std::string where = "node " + std::to_string(id);
    switch (n.kind) {
      case NodeKind::kAllGather:
        for (ParamId p : n.refs) {
          if (!gathered.insert(p).second) {
            problems.push_back(where + ": parameter " + std::to_string(p) +
                               " gathered twice");
          }
        }
        break;
      case NodeKind::kRelease:
        if (gathered.erase(n.refs.front()) == 0) {
          problems.push_back(where + ": release of a buffer that is not gathered");
        }
        break;
      case NodeKind::kCompute:
        if (!n.refs.empty() && sharded.contains(n.refs.front()) &&
            !gathered.contains(n.refs.front())) {
          problems.push_back(where + ": parameter " +
                             std::to_string(n.refs.front()) +
                             " used while not gathered");
        }
        break;
      default:
        break;
    }
  }
  for (ParamId p : gathered) {
    problems.push_back("parameter " + std::to_string(p) + " never released");
  }
  return problems;
}

std::int64_t CountKind(const Graph& graph, const Schedule& schedule,
                       NodeKind kind) {
  return std::count_if(schedule.order.begin(), schedule.order.end(),
                       [&](NodeId id) { return graph.node(id).kind == kind; });
}

}  // namespace shardopt::testing
