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

// Profile-guided pass pipeline. The inner loop applies a pass and
// re-profiles the result for the next pass; the outer loop runs warm-up
// iterations so that optimizer states become resident before the
// offloading pass sees the profile.

#ifndef SHARDOPT_PIPELINE_H_
#define SHARDOPT_PIPELINE_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shardopt/cost_model.h"
#include "shardopt/error.h"
#include "shardopt/graph.h"
#include "shardopt/offload_pass.h"
#include "shardopt/prefetch_pass.h"
#include "shardopt/simulator.h"
#include "shardopt/unshard_pass.h"

namespace shardopt {

enum class PassKind { kShard, kPrefetch, kUnshard, kOffload };

std::string_view PassKindName(PassKind pass);
// Comma-separated names, e.g. "shard,prefetch,unshard". Throws
// Error(kInvalidInput) on unknown or repeated names.
std::vector<PassKind> ParsePassList(std::string_view text);

struct PipelineConfig {
  std::vector<PassKind> passes = {PassKind::kShard, PassKind::kPrefetch,
                                  PassKind::kUnshard};
  int warmup_iterations = 5;
  PrefetchMode prefetch_mode = PrefetchMode::kFaithful;
};

struct StageReport {
  std::string name;
  std::vector<std::string> provenance;
  SimReport report;
  std::int64_t profile_peak_bytes = 0;
  bool optimizer_resident = false;
};

struct PipelineResult {
  Graph graph;
  Schedule schedule;
  std::vector<StageReport> stages;  // "baseline" first
  std::vector<Diagnostic> warnings;
  std::optional<PrefetchLog> prefetch_log;
  std::optional<UnshardSelection> unshard;
  std::vector<OffloadEvent> offload_log;
  std::vector<FragmentId> offloaded;
};

// Throws Error(kInvalidInput) when shard is listed but not first; errors
// raised by a pass are rethrown with the stage name prefixed.
PipelineResult run_pipeline(const Graph& graph, const ClusterConfig& cluster,
                            const CostModel& cost,
                            const PipelineConfig& config);

}  // namespace shardopt

#endif  // SHARDOPT_PIPELINE_H_
