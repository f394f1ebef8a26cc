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

#include "shardopt/pipeline.h"

#include <algorithm>
#include <set>
#include <string>
#include <utility>

#include "shardopt/shard_pass.h"

namespace shardopt {
namespace {

std::vector<Parameter> GatheredParams(const Graph& graph,
                                      const Schedule& schedule) {
  std::set<ParamId> ids;
  for (NodeId id : schedule.order) {
    const Node& n = graph.node(id);
    if (n.kind == NodeKind::kAllGather) ids.insert(n.refs.begin(), n.refs.end());
  }
  std::vector<Parameter> out;
  for (ParamId p : ids) out.push_back(graph.param(p));
  return out;
}

template <typename Fn>
auto InStage(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what(), e.node());
  }
}

}  // namespace

std::string_view PassKindName(PassKind pass) {
  switch (pass) {
    case PassKind::kShard:
      return "shard";
    case PassKind::kPrefetch:
      return "prefetch";
    case PassKind::kUnshard:
      return "unshard";
    case PassKind::kOffload:
      return "offload";
  }
  return "?";
}

std::vector<PassKind> ParsePassList(std::string_view text) {
  std::vector<PassKind> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto name = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{}
                                           : text.substr(comma + 1);
    if (name.empty()) continue;
    std::optional<PassKind> kind;
    for (auto k : {PassKind::kShard, PassKind::kPrefetch, PassKind::kUnshard,
                   PassKind::kOffload}) {
      if (PassKindName(k) == name) kind = k;
    }
    if (!kind) {
      throw Error(ErrorCode::kInvalidInput,
                  "unknown pass '" + std::string(name) + "'");
    }
    if (std::find(out.begin(), out.end(), *kind) != out.end()) {
      throw Error(ErrorCode::kInvalidInput,
                  "pass '" + std::string(name) + "' listed twice");
    }
    out.push_back(*kind);
  }
  return out;
}

PipelineResult run_pipeline(const Graph& graph, const ClusterConfig& cluster,
                            const CostModel& cost,
                            const PipelineConfig& config) {
  const auto& passes = config.passes;
  auto position = [&](PassKind k) {
    return std::find(passes.begin(), passes.end(), k) - passes.begin();
  };
  const auto npos = static_cast<std::ptrdiff_t>(passes.size());
  for (std::size_t i = 0; i < passes.size(); ++i) {
    if (std::count(passes.begin(), passes.end(), passes[i]) > 1) {
      throw Error(ErrorCode::kInvalidInput, "pass listed twice");
    }
  }
  if (position(PassKind::kShard) != npos && position(PassKind::kShard) != 0) {
    throw Error(ErrorCode::kInvalidInput, "shard must be the first pass");
  }

  PipelineResult result;
  if (position(PassKind::kUnshard) < position(PassKind::kPrefetch) &&
      position(PassKind::kPrefetch) != npos) {
    result.warnings.push_back(
        {"OrderWarning",
         "unshard runs before prefetch; prefetching is applied first for best "
         "effect, since unsharding consumes the memory prefetching would use",
         std::nullopt});
  }
  if (position(PassKind::kOffload) != npos &&
      position(PassKind::kOffload) != npos - 1) {
    result.warnings.push_back(
        {"OrderWarning",
         "offload always runs after the warm-up iterations, following every "
         "other pass",
         std::nullopt});
  }

  Graph g = graph;
  Schedule s = InitialSchedule(g);
  const SimOptions first_iteration{.optimizer_state_resident = false};
  const SimOptions steady_state{.optimizer_state_resident = true};

  auto record = [&](std::string name, const SimOptions& options) {
    StageReport stage;
    stage.name = std::move(name);
    stage.provenance = s.provenance;
    stage.report = simulate(g, s, cost, cluster, options);
    stage.profile_peak_bytes = profile(g, s, cost, cluster, options).peak_bytes;
    stage.optimizer_resident = options.optimizer_state_resident;
    result.stages.push_back(std::move(stage));
  };
  auto adopt = [&](PassResult r) {
    g = std::move(r.graph);
    s = std::move(r.schedule);
    result.warnings.insert(result.warnings.end(), r.warnings.begin(),
                           r.warnings.end());
  };

  record("baseline", first_iteration);
  for (PassKind pass : passes) {
    const std::string name(PassKindName(pass));
    switch (pass) {
      case PassKind::kShard:
        adopt(InStage(name, [&] { return apply_sharding(g, s, cluster); }));
        break;
      case PassKind::kPrefetch: {
        auto r = InStage(name, [&] {
          const auto prof = profile(g, s, cost, cluster, first_iteration);
          return apply_prefetch(g, s, prof, cluster, cost,
                                {.mode = config.prefetch_mode});
        });
        result.prefetch_log = std::move(r.log);
        adopt({std::move(r.graph), std::move(r.schedule), std::move(r.warnings)});
        break;
      }
      case PassKind::kUnshard: {
        auto r = InStage(name, [&] {
          const auto prof = profile(g, s, cost, cluster, first_iteration);
          auto sel = select_unshard(GatheredParams(g, s), prof, cluster, cost);
          auto rewritten = apply_unshard(g, s, sel.selected);
          return std::make_pair(std::move(sel), std::move(rewritten));
        });
        result.unshard = std::move(r.first);
        adopt(std::move(r.second));
        break;
      }
      case PassKind::kOffload:
        continue;
    }
    record(name, first_iteration);
  }

  // Outer loop: the first simulated update allocates optimizer states; the
  // remaining warm-up iterations run with them resident.
  bool resident = false;
  for (int it = 0; it < config.warmup_iterations; ++it) {
    simulate(g, s, cost, cluster, resident ? steady_state : first_iteration);
    resident = true;
  }
  if (config.warmup_iterations > 0) record("warmup", steady_state);

  if (position(PassKind::kOffload) != npos) {
    const SimOptions options = resident ? steady_state : first_iteration;
    auto forward = InStage("offload", [&] {
      const auto prof = profile(g, s, cost, cluster, options);
      return apply_offload_forward(g, s, prof, g.fragments(), cluster);
    });
    g = std::move(forward.graph);
    s = std::move(forward.schedule);
    result.offloaded = forward.offloaded;
    result.offload_log = std::move(forward.log);
    result.warnings.insert(result.warnings.end(), forward.warnings.begin(),
                           forward.warnings.end());
    auto backward = InStage("offload", [&] {
      const auto prof = profile(g, s, cost, cluster, options);
      return apply_reload_backward(g, s, prof, result.offloaded, cluster);
    });
    g = std::move(backward.graph);
    s = std::move(backward.schedule);
    result.offload_log.insert(result.offload_log.end(), backward.log.begin(),
                              backward.log.end());
    result.warnings.insert(result.warnings.end(), backward.warnings.begin(),
                           backward.warnings.end());
    record("offload", options);
  }

  result.graph = std::move(g);
  result.schedule = std::move(s);
  return result;
}

}  // namespace shardopt
