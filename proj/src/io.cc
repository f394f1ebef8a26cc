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

#include "shardopt/io.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "shardopt/error.h"

namespace shardopt {
namespace {

[[noreturn]] void ParseFail(const std::string& msg) {
  throw Error(ErrorCode::kParseError, msg);
}

void RejectUnknown(const Json& j, std::string_view what,
                   std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) ParseFail(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      ParseFail("unknown field '" + key + "' in " + std::string(what));
    }
  }
}

std::int64_t ReadInt(const Json& j, std::string_view what) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v) return static_cast<std::int64_t>(v);
  }
  ParseFail(std::string(what) + " must be an integer");
}

std::int64_t ReadBytes(const Json& j, std::string_view what) {
  if (j.is_string()) return ParseSize(j.get<std::string>());
  return ReadInt(j, what);
}

double ReadDouble(const Json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return static_cast<double>(ParseSize(j.get<std::string>()));
  ParseFail(std::string(what) + " must be a number");
}

template <typename T>
T Enum(std::optional<T> value, const Json& j, std::string_view what) {
  if (!value) ParseFail("unknown " + std::string(what) + " '" + j.dump() + "'");
  return *value;
}

}  // namespace

std::int64_t ParseSize(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
      s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
      s.remove_suffix(1);
    }
    return s;
  };
  const std::string_view s = trim(text);
  std::size_t split = 0;
  while (split < s.size() &&
         (std::isdigit(static_cast<unsigned char>(s[split])) || s[split] == '.')) {
    ++split;
  }
  if (split == 0) ParseFail("invalid size '" + std::string(text) + "'");
  std::string unit(trim(s.substr(split)));
  std::transform(unit.begin(), unit.end(), unit.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  double scale = 0;
  if (unit.empty() || unit == "B") {
    scale = 1;
  } else if (unit == "KB" || unit == "KIB" || unit == "K") {
    scale = 1024.0;
  } else if (unit == "MB" || unit == "MIB" || unit == "M") {
    scale = 1024.0 * 1024;
  } else if (unit == "GB" || unit == "GIB" || unit == "G") {
    scale = 1024.0 * 1024 * 1024;
  } else if (unit == "TB" || unit == "TIB" || unit == "T") {
    scale = 1024.0 * 1024 * 1024 * 1024;
  } else {
    ParseFail("unknown size unit '" + unit + "'");
  }
  double value = 0;
  try {
    value = std::stod(std::string(s.substr(0, split)));
  } catch (const std::exception&) {
    ParseFail("invalid size '" + std::string(text) + "'");
  }
  return std::llround(value * scale);
}

Json ParseJsonText(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    ParseFail(std::string(source) + ":" + std::to_string(line) + ":" +
              std::to_string(column) + ": malformed JSON");
  }
}

Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ParseFail("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseJsonText(buf.str(), path.string());
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kInvalidInput, "cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Graph ModelFromJson(const Json& j) {
  RejectUnknown(j, "model", {"parameters", "optimizer_fragments", "nodes"});
  std::vector<Parameter> params;
  std::vector<OptimizerStateFragment> fragments;
  std::vector<Node> nodes;
  for (const auto& p : j.value("parameters", Json::array())) {
    RejectUnknown(p, "parameter", {"id", "size_bytes", "shard_count"});
    params.push_back({ReadInt(p.at("id"), "parameter id"),
                      ReadBytes(p.at("size_bytes"), "size_bytes"),
                      static_cast<int>(ReadInt(
                          p.value("shard_count", Json(1)), "shard_count"))});
  }
  for (const auto& f : j.value("optimizer_fragments", Json::array())) {
    RejectUnknown(f, "optimizer fragment", {"id", "size_bytes"});
    fragments.push_back({ReadInt(f.at("id"), "fragment id"),
                         ReadBytes(f.at("size_bytes"), "size_bytes")});
  }
  for (const auto& n : j.value("nodes", Json::array())) {
    RejectUnknown(n, "node",
                  {"id", "kind", "marker", "duration_us", "transient_bytes",
                   "persistent_delta_bytes", "deps", "param_ref", "micro_step",
                   "phase"});
    Node node;
    try {
      node.id = ReadInt(n.at("id"), "node id");
      const Json& kind = n.at("kind");
      node.kind = Enum(ParseNodeKind(kind.get<std::string>()), kind, "node kind");
      if (n.contains("marker")) {
        node.marker = Enum(ParseMarkerKind(n["marker"].get<std::string>()),
                           n["marker"], "marker");
      }
      if (n.contains("phase")) {
        node.phase =
            Enum(ParsePhase(n["phase"].get<std::string>()), n["phase"], "phase");
      }
      node.duration_us = ReadInt(n.value("duration_us", Json(0)), "duration_us");
      node.transient_bytes =
          ReadBytes(n.value("transient_bytes", Json(0)), "transient_bytes");
      node.persistent_delta_bytes = ReadBytes(
          n.value("persistent_delta_bytes", Json(0)), "persistent_delta_bytes");
      node.micro_step =
          static_cast<int>(ReadInt(n.value("micro_step", Json(0)), "micro_step"));
      for (const auto& d : n.value("deps", Json::array())) {
        node.deps.push_back(ReadInt(d, "dependency id"));
      }
      if (n.contains("param_ref") && !n["param_ref"].is_null()) {
        const Json& ref = n["param_ref"];
        if (ref.is_array()) {
          for (const auto& r : ref) node.refs.push_back(ReadInt(r, "param_ref"));
        } else {
          node.refs.push_back(ReadInt(ref, "param_ref"));
        }
      }
    } catch (const Json::exception& e) {
      ParseFail(std::string("malformed node: ") + e.what());
    }
    nodes.push_back(std::move(node));
  }
  return Graph(std::move(params), std::move(fragments), std::move(nodes));
}

Json ModelToJson(const Graph& graph) {
  Json j;
  j["parameters"] = Json::array();
  for (const auto& p : graph.params()) {
    Json e{{"id", p.id}, {"size_bytes", p.size_bytes}};
    if (p.shard_count != 1) e["shard_count"] = p.shard_count;
    j["parameters"].push_back(std::move(e));
  }
  j["optimizer_fragments"] = Json::array();
  for (const auto& f : graph.fragments()) {
    j["optimizer_fragments"].push_back({{"id", f.id}, {"size_bytes", f.size_bytes}});
  }
  j["nodes"] = Json::array();
  for (const auto& n : graph.nodes()) {
    Json e;
    e["id"] = n.id;
    e["kind"] = NodeKindName(n.kind);
    if (n.kind == NodeKind::kMarker) e["marker"] = MarkerKindName(n.marker);
    e["phase"] = PhaseName(n.phase);
    e["micro_step"] = n.micro_step;
    e["duration_us"] = n.duration_us;
    e["transient_bytes"] = n.transient_bytes;
    e["persistent_delta_bytes"] = n.persistent_delta_bytes;
    e["deps"] = n.deps;
    if (n.refs.size() == 1) {
      e["param_ref"] = n.refs.front();
    } else if (!n.refs.empty()) {
      e["param_ref"] = n.refs;
    } else {
      e["param_ref"] = nullptr;
    }
    j["nodes"].push_back(std::move(e));
  }
  return j;
}

ClusterSpec ClusterFromJson(const Json& j) {
  RejectUnknown(j, "cluster",
                {"device_count", "device_memory_bytes", "runtime_reserve_bytes",
                 "memory_limit_bytes", "prefetch_limit_bytes",
                 "fusion_threshold", "accumulation_steps", "host_memory_bytes",
                 "collective_latency_us", "collective_bandwidth",
                 "host_transfer_latency_us", "host_transfer_bandwidth",
                 "collective_table"});
  ClusterSpec spec;
  ClusterConfig& c = spec.cluster;
  try {
    c.device_count =
        static_cast<int>(ReadInt(j.value("device_count", Json(1)), "device_count"));
    c.device_memory_bytes =
        ReadBytes(j.value("device_memory_bytes", Json(80 * kGiB)),
                  "device_memory_bytes");
    c.runtime_reserve_bytes = ReadBytes(
        j.value("runtime_reserve_bytes", Json(0)), "runtime_reserve_bytes");
    c.memory_limit_bytes =
        j.contains("memory_limit_bytes")
            ? ReadBytes(j["memory_limit_bytes"], "memory_limit_bytes")
            : c.usable_device_bytes() / 10 * 9;
    c.prefetch_limit_bytes = ReadBytes(
        j.value("prefetch_limit_bytes", Json(2 * kGiB)), "prefetch_limit_bytes");
    c.fusion_threshold =
        ReadDouble(j.value("fusion_threshold", Json(1.5)), "fusion_threshold");
    c.accumulation_steps = static_cast<int>(
        ReadInt(j.value("accumulation_steps", Json(1)), "accumulation_steps"));
    if (j.contains("host_memory_bytes")) {
      c.host_memory_bytes = ReadBytes(j["host_memory_bytes"], "host_memory_bytes");
    }
    std::vector<CostPoint> table;
    for (const auto& p : j.value("collective_table", Json::array())) {
      RejectUnknown(p, "collective_table entry", {"bytes", "time_us"});
      table.push_back({ReadBytes(p.at("bytes"), "bytes"),
                       ReadDouble(p.at("time_us"), "time_us")});
    }
    spec.cost = CostModel(
        ReadDouble(j.value("collective_latency_us", Json(100.0)),
                   "collective_latency_us"),
        ReadDouble(j.value("collective_bandwidth", Json(40e9)),
                   "collective_bandwidth"),
        ReadDouble(j.value("host_transfer_latency_us", Json(10.0)),
                   "host_transfer_latency_us"),
        ReadDouble(j.value("host_transfer_bandwidth", Json(20e9)),
                   "host_transfer_bandwidth"),
        std::move(table));
  } catch (const Json::exception& e) {
    ParseFail(std::string("malformed cluster: ") + e.what());
  }
  c.Validate();
  return spec;
}

Json ClusterToJson(const ClusterSpec& spec) {
  const auto& c = spec.cluster;
  Json j{{"device_count", c.device_count},
         {"device_memory_bytes", c.device_memory_bytes},
         {"runtime_reserve_bytes", c.runtime_reserve_bytes},
         {"memory_limit_bytes", c.memory_limit_bytes},
         {"prefetch_limit_bytes", c.prefetch_limit_bytes},
         {"fusion_threshold", c.fusion_threshold},
         {"accumulation_steps", c.accumulation_steps},
         {"collective_latency_us", spec.cost.collective_latency_us()},
         {"collective_bandwidth", spec.cost.collective_bandwidth()},
         {"host_transfer_latency_us", spec.cost.host_transfer_latency_us()},
         {"host_transfer_bandwidth", spec.cost.host_transfer_bandwidth()}};
  if (c.host_memory_bytes != INT64_MAX) {
    j["host_memory_bytes"] = c.host_memory_bytes;
  }
  if (!spec.cost.collective_table().empty()) {
    j["collective_table"] = Json::array();
    for (const auto& p : spec.cost.collective_table()) {
      j["collective_table"].push_back({{"bytes", p.bytes}, {"time_us", p.time_us}});
    }
  }
  return j;
}

PipelineConfig PipelineConfigFromJson(const Json& j) {
  RejectUnknown(j, "pipeline config", {"passes", "warmup_iterations", "strict"});
  PipelineConfig config;
  try {
    if (j.contains("passes")) {
      const Json& p = j["passes"];
      std::string joined;
      if (p.is_array()) {
        for (const auto& name : p) joined += name.get<std::string>() + ",";
      } else {
        joined = p.get<std::string>();
      }
      config.passes = ParsePassList(joined);
    }
    config.warmup_iterations = static_cast<int>(
        ReadInt(j.value("warmup_iterations", Json(5)), "warmup_iterations"));
    if (j.value("strict", false)) config.prefetch_mode = PrefetchMode::kStrict;
  } catch (const Json::exception& e) {
    ParseFail(std::string("malformed pipeline config: ") + e.what());
  }
  return config;
}

Json ScheduleToJson(const Schedule& schedule) {
  return Json{{"order", schedule.order}, {"provenance", schedule.provenance}};
}

Schedule ScheduleFromJson(const Json& j) {
  RejectUnknown(j, "schedule", {"order", "provenance"});
  Schedule s;
  try {
    for (const auto& id : j.at("order")) s.order.push_back(ReadInt(id, "node id"));
    for (const auto& p : j.value("provenance", Json::array())) {
      s.provenance.push_back(p.get<std::string>());
    }
  } catch (const Json::exception& e) {
    ParseFail(std::string("malformed schedule: ") + e.what());
  }
  return s;
}

Json WorkloadSpecToJson(const WorkloadSpec& spec) {
  return Json{{"layers", spec.layers},
              {"compute_us", spec.compute_us},
              {"param_bytes", spec.param_bytes},
              {"accumulation_steps", spec.accumulation_steps},
              {"optimizer_multiplier", spec.optimizer_multiplier},
              {"activation_bytes", spec.activation_bytes},
              {"transient_bytes", spec.transient_bytes},
              {"backward_factor", spec.backward_factor},
              {"fragment_count", spec.fragment_count},
              {"optimizer_step_us", spec.optimizer_step_us},
              {"forward_only", spec.forward_only}};
}

Json SimReportToJson(const SimReport& r, bool include_traces) {
  Json j{{"iteration_time_us", r.iteration_time_us},
         {"peak_memory_bytes", r.peak_memory_bytes},
         {"initial_memory_bytes", r.initial_memory_bytes},
         {"final_memory_bytes", r.final_memory_bytes},
         {"total_collective_bytes", r.total_collective_bytes},
         {"gather_count", r.gather_count},
         {"gathered_bytes", r.gathered_bytes},
         {"compute_busy_us", r.compute_busy_us},
         {"collective_busy_us", r.collective_busy_us},
         {"host_transfer_busy_us", r.host_transfer_busy_us},
         {"overlap_fraction", r.overlap_fraction}};
  j["overflows"] = Json::array();
  for (const auto& o : r.overflows) {
    j["overflows"].push_back({{"time_us", o.time_us},
                              {"resident_bytes", o.resident_bytes},
                              {"node", o.node}});
  }
  if (include_traces) {
    j["timeline"] = Json::array();
    for (const auto& e : r.timeline) {
      j["timeline"].push_back({{"node", e.node},
                               {"kind", NodeKindName(e.kind)},
                               {"stream", StreamName(e.stream)},
                               {"start_us", e.start_us},
                               {"end_us", e.end_us}});
    }
    j["memory_trace"] = Json::array();
    for (const auto& m : r.memory_trace) {
      j["memory_trace"].push_back(Json::array({m.time_us, m.resident_bytes}));
    }
  }
  return j;
}

std::string TimelineCsv(const SimReport& report) {
  std::string out = "node_id,kind,stream,start_us,end_us\n";
  for (const auto& e : report.timeline) {
    out += std::to_string(e.node) + "," + std::string(NodeKindName(e.kind)) +
           "," + std::string(StreamName(e.stream)) + "," +
           std::to_string(e.start_us) + "," + std::to_string(e.end_us) + "\n";
  }
  return out;
}

std::string MemoryTraceCsv(const SimReport& report) {
  std::string out = "time_us,resident_bytes\n";
  for (const auto& m : report.memory_trace) {
    out += std::to_string(m.time_us) + "," + std::to_string(m.resident_bytes) +
           "\n";
  }
  return out;
}

Json StageReportsToJson(const std::vector<StageReport>& stages) {
  Json j = Json::array();
  for (const auto& s : stages) {
    j.push_back({{"stage", s.name},
                 {"provenance", s.provenance},
                 {"optimizer_resident", s.optimizer_resident},
                 {"profile_peak_bytes", s.profile_peak_bytes},
                 {"report", SimReportToJson(s.report, false)}});
  }
  return j;
}

std::string PrefetchLogJsonl(const PrefetchLog& log) {
  std::string out;
  for (const auto& d : log.decisions) {
    out += Json{{"event", "check"},
                {"node", d.node},
                {"action", PrefetchActionName(d.action)},
                {"vm_group", d.group_bytes},
                {"vm_checkpoint", d.checkpoint_bytes},
                {"position", d.position}}
               .dump() +
           "\n";
  }
  for (const auto& e : log.emissions) {
    out += Json{{"event", "emit_group"},
                {"position", e.position},
                {"members", e.members},
                {"bytes", e.bytes},
                {"strict_flush", e.strict_flush},
                {"dependency_flush", e.dependency_flush}}
               .dump() +
           "\n";
  }
  for (const auto& f : log.fusions) {
    out += Json{{"event", "fuse"},
                {"node", f.node},
                {"members", f.members},
                {"bytes", f.bytes}}
               .dump() +
           "\n";
  }
  return out;
}

std::string UnshardLogJsonl(const UnshardSelection& selection) {
  std::string out;
  for (const auto& d : selection.log) {
    out += Json{{"id", d.param},
                {"B_ag", d.buffer_bytes},
                {"ratio", d.ratio},
                {"selected", d.selected},
                {"cumulative_bytes", d.cumulative_bytes}}
               .dump() +
           "\n";
  }
  return out;
}

std::string OffloadLogJsonl(const std::vector<OffloadEvent>& log) {
  std::string out;
  for (const auto& e : log) {
    Json j{{"event", OffloadEventKindName(e.kind)},
           {"position", e.position},
           {"node", e.node},
           {"p_mem", e.p_mem},
           {"freed", e.freed},
           {"reloaded", e.reloaded}};
    j["fragment"] = e.fragment ? Json(*e.fragment) : Json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::string DiagnosticsJsonl(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    Json j{{"code", d.code}, {"message", d.message}};
    j["node"] = d.node ? Json(*d.node) : Json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ComparisonRow> ComparisonRows(const std::string& configuration,
                                          const Json& stages) {
  std::vector<ComparisonRow> rows;
  try {
    for (const auto& s : stages) {
      const Json& r = s.at("report");
      rows.push_back({configuration, s.at("stage").get<std::string>(),
                      r.at("iteration_time_us").get<std::int64_t>(),
                      r.at("peak_memory_bytes").get<std::int64_t>(),
                      r.at("gather_count").get<std::int64_t>(),
                      r.at("gathered_bytes").get<std::int64_t>(),
                      r.at("overlap_fraction").get<double>()});
    }
  } catch (const Json::exception& e) {
    ParseFail(std::string("malformed stage report: ") + e.what());
  }
  return rows;
}

std::string ComparisonTable(const std::vector<ComparisonRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %-10s %14s %14s %8s %14s %8s\n",
                "configuration", "stage", "iter_time_us", "peak_MiB", "gathers",
                "gathered_MiB", "overlap");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-24s %-10s %14lld %14.1f %8lld %14.1f %8.3f\n",
                  r.configuration.c_str(), r.stage.c_str(),
                  static_cast<long long>(r.iteration_time_us),
                  static_cast<double>(r.peak_memory_bytes) / (1 << 20),
                  static_cast<long long>(r.gather_count),
                  static_cast<double>(r.gathered_bytes) / (1 << 20),
                  r.overlap_fraction);
    out += line;
  }
  return out;
}

Json ComparisonJson(const std::vector<ComparisonRow>& rows) {
  Json j = Json::array();
  for (const auto& r : rows) {
    j.push_back({{"configuration", r.configuration},
                 {"stage", r.stage},
                 {"iteration_time_us", r.iteration_time_us},
                 {"peak_memory_bytes", r.peak_memory_bytes},
                 {"gather_count", r.gather_count},
                 {"gathered_bytes", r.gathered_bytes},
                 {"overlap_fraction", r.overlap_fraction}});
  }
  return j;
}

}  // namespace shardopt
