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

// File formats: model and cluster specifications, schedules, reports and
// decision logs (JSON / JSON lines), timeline and memory traces (CSV).

#ifndef SHARDOPT_IO_H_
#define SHARDOPT_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shardopt/cost_model.h"
#include "shardopt/graph.h"
#include "shardopt/offload_pass.h"
#include "shardopt/pipeline.h"
#include "shardopt/prefetch_pass.h"
#include "shardopt/simulator.h"
#include "shardopt/unshard_pass.h"
#include "shardopt/workload.h"

namespace shardopt {

using Json = nlohmann::ordered_json;

// "512", "64KB", "1.5 GB", "2GiB": KB/MB/GB/TB are powers of 1024.
// Throws Error(kParseError).
std::int64_t ParseSize(std::string_view text);

// Parses JSON text; syntax errors become Error(kParseError) naming the
// line and column.
Json ParseJsonText(std::string_view text, std::string_view source = "<input>");
Json ReadJsonFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

// Model specification. Unknown fields are rejected.
Graph ModelFromJson(const Json& j);
Json ModelToJson(const Graph& graph);

struct ClusterSpec {
  ClusterConfig cluster;
  CostModel cost{100.0, 40e9, 10.0, 20e9};
};
ClusterSpec ClusterFromJson(const Json& j);
Json ClusterToJson(const ClusterSpec& spec);

// Pipeline options file: {"passes", "warmup_iterations", "strict"}.
PipelineConfig PipelineConfigFromJson(const Json& j);

Json ScheduleToJson(const Schedule& schedule);
Schedule ScheduleFromJson(const Json& j);

Json WorkloadSpecToJson(const WorkloadSpec& spec);

Json SimReportToJson(const SimReport& report, bool include_traces = true);
std::string TimelineCsv(const SimReport& report);
std::string MemoryTraceCsv(const SimReport& report);

Json StageReportsToJson(const std::vector<StageReport>& stages);

// One JSON object per line.
std::string PrefetchLogJsonl(const PrefetchLog& log);
std::string UnshardLogJsonl(const UnshardSelection& selection);
std::string OffloadLogJsonl(const std::vector<OffloadEvent>& log);
std::string DiagnosticsJsonl(const std::vector<Diagnostic>& diagnostics);

// Comparison rows for `report`: one per stage of every input document.
struct ComparisonRow {
  std::string configuration;
  std::string stage;
  std::int64_t iteration_time_us = 0;
  std::int64_t peak_memory_bytes = 0;
  std::int64_t gather_count = 0;
  std::int64_t gathered_bytes = 0;
  double overlap_fraction = 0.0;
};
std::vector<ComparisonRow> ComparisonRows(const std::string& configuration,
                                          const Json& stages);
std::string ComparisonTable(const std::vector<ComparisonRow>& rows);
Json ComparisonJson(const std::vector<ComparisonRow>& rows);

}  // namespace shardopt

#endif  // SHARDOPT_IO_H_
