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

#include "shardopt/workload.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shardopt/error.h"

namespace shardopt {

Graph generate_workload(const WorkloadSpec& spec) {
  if (spec.layers < 1 || spec.compute_us <= 0 || spec.param_bytes <= 0 ||
      spec.accumulation_steps < 1 || spec.optimizer_multiplier < 0 ||
      spec.activation_bytes < 0 || spec.transient_bytes < 0 ||
      spec.backward_factor < 1 || spec.fragment_count < 1 ||
      spec.optimizer_step_us < 0) {
    throw Error(ErrorCode::kInvalidInput, "invalid workload parameters");
  }

  std::vector<Parameter> params;
  for (int l = 0; l < spec.layers; ++l) params.push_back({l, spec.param_bytes, 1});

  std::vector<OptimizerStateFragment> fragments;
  const auto state_bytes = static_cast<std::int64_t>(std::llround(
      spec.optimizer_multiplier * static_cast<double>(spec.param_bytes) *
      spec.layers));
  if (state_bytes > 0 && !spec.forward_only) {
    const std::int64_t count =
        std::min<std::int64_t>(spec.fragment_count, state_bytes);
    for (std::int64_t f = 0; f < count; ++f) {
      const std::int64_t size = state_bytes / count + (f < state_bytes % count);
      fragments.push_back({f, size});
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
    return emit(std::move(n));
  };

  for (int m = 0; m < spec.accumulation_steps; ++m) {
    std::vector<NodeId> forward(spec.layers);
    marker(MarkerKind::kForwardBegin, Phase::kForward, m);
    for (int l = 0; l < spec.layers; ++l) {
      Node n;
      n.kind = NodeKind::kCompute;
      n.phase = Phase::kForward;
      n.micro_step = m;
      n.duration_us = spec.compute_us;
      n.transient_bytes = spec.transient_bytes;
      n.persistent_delta_bytes = spec.forward_only ? 0 : spec.activation_bytes;
      n.refs = {l};
      forward[l] = emit(std::move(n));
    }
    marker(MarkerKind::kForwardEnd, Phase::kForward, m);
    if (spec.forward_only) break;

    marker(MarkerKind::kBackwardBegin, Phase::kBackward, m);
    for (int l = spec.layers - 1; l >= 0; --l) {
      Node n;
      n.kind = NodeKind::kCompute;
      n.phase = Phase::kBackward;
      n.micro_step = m;
      n.duration_us = spec.compute_us * spec.backward_factor;
      n.transient_bytes = spec.transient_bytes;
      n.persistent_delta_bytes = -spec.activation_bytes;
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
    step.duration_us = spec.optimizer_step_us;
    emit(std::move(step));
    marker(MarkerKind::kStepEnd, Phase::kUpdate, spec.accumulation_steps - 1);
  }
  return Graph(std::move(params), std::move(fragments), std::move(nodes));
}

}  // namespace shardopt
