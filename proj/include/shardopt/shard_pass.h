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

#ifndef SHARDOPT_SHARD_PASS_H_
#define SHARDOPT_SHARD_PASS_H_

#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/error.h"
#include "shardopt/graph.h"

namespace shardopt {

struct PassResult {
  Graph graph;
  Schedule schedule;
  std::vector<Diagnostic> warnings;
};

// Fully-sharded rewrite. For every parameter and every (phase, micro-step)
// region that consumes it, inserts an AllGather immediately before the
// region's first consumer and a Release immediately after its last one.
// Consumers depend on the gather; the release depends on every consumer.
// A region's gather depends on the release that ends the previous region of
// the same parameter. Regions whose consumers interleave share one buffer.
// Parameters are re-sharded across `cluster.device_count` devices.
//
// Throws Error(kAlreadySharded) if the graph already holds gathers or
// releases. Unused parameters produce an "UnusedParameter" warning.
PassResult apply_sharding(const Graph& graph, const Schedule& schedule,
                          const ClusterConfig& cluster);

}  // namespace shardopt

#endif  // SHARDOPT_SHARD_PASS_H_
