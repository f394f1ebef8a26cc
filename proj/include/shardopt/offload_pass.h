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

// Adaptive offloading of optimizer-state fragments: just enough fragments
// leave the device at iteration start, each is freed right before the first
// operator that needs its headroom, and reloads are issued during the last
// backward region as soon as the remaining profile leaves room for them.

#ifndef SHARDOPT_OFFLOAD_PASS_H_
#define SHARDOPT_OFFLOAD_PASS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/error.h"
#include "shardopt/graph.h"
#include "shardopt/simulator.h"

namespace shardopt {

enum class OffloadEventKind {
  kOffload,     // OffloadStart emitted at the schedule front
  kCheck,       // memory check before an operator of the forward walk
  kSync,        // TransferSync + free inserted before `node`
  kReload,      // ReloadStart inserted before `node`
  kReloadSync,  // TransferSync for a reload, before the optimizer step
  kFallback,    // no headroom; synchronous reload before the optimizer step
};

std::string_view OffloadEventKindName(OffloadEventKind kind);

struct OffloadEvent {
  OffloadEventKind kind = OffloadEventKind::kCheck;
  std::optional<FragmentId> fragment;
  std::size_t position = 0;  // index of `node` in the input schedule
  NodeId node = 0;
  std::int64_t p_mem = 0;    // profiled bytes before `node`, without states
  std::int64_t freed = 0;    // M⁻ after this event
  std::int64_t reloaded = 0;  // bytes reloaded so far

  bool operator==(const OffloadEvent&) const = default;
};

struct OffloadResult {
  Graph graph;
  Schedule schedule;
  std::vector<FragmentId> offloaded;  // offload order
  std::int64_t peak_bytes = 0;        // M_peak
  std::int64_t optimizer_bytes = 0;   // M_opt
  std::vector<OffloadEvent> log;
  std::vector<Diagnostic> warnings;
};

// Forward half. `profile` must come from an iteration with optimizer states
// allocated; when it does not, no state exists yet and the schedule is
// returned unchanged. Fragments are considered in the given order and
// synchronized first-in first-out.
//
// Throws Error(kInfeasible) when some operator exceeds M even with every
// fragment offloaded, and Error(kInsufficientHostCapacity) when the host
// cannot hold the offloaded bytes.
OffloadResult apply_offload_forward(
    const Graph& graph, const Schedule& schedule, const MemoryProfile& profile,
    std::span<const OptimizerStateFragment> fragments,
    const ClusterConfig& cluster);

// Backward half, run on the forward half's output and a profile of it.
// Fragments reload in reverse offload order, each before the earliest
// operator of the final backward region from which every remaining operator
// up to the optimizer step keeps P_mem + reloaded bytes <= M. Reload
// synchronizations precede the optimizer step. A fragment without such a
// position reloads synchronously before the step, with a ReloadInfeasible
// warning.
OffloadResult apply_reload_backward(const Graph& graph,
                                    const Schedule& schedule,
                                    const MemoryProfile& profile,
                                    std::span<const FragmentId> offloaded,
                                    const ClusterConfig& cluster);

// Comparison baseline: offload and synchronize `offloaded` at the schedule
// front, reload and synchronize everything right before the optimizer step.
// Takes the unoffloaded schedule.
OffloadResult synchronous_offload(const Graph& graph, const Schedule& schedule,
                                  std::span<const FragmentId> offloaded);

}  // namespace shardopt

#endif  // SHARDOPT_OFFLOAD_PASS_H_
