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

#include "shardopt/cli.h"

#include <atomic>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "shardopt/error.h"
#include "shardopt/io.h"
#include "shardopt/pipeline.h"
#include "shardopt/simulator.h"
#include "shardopt/workload.h"

namespace shardopt {
namespace {

namespace fs = std::filesystem;

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected failure (I/O or internal error)\n"
    "  2  invalid input (malformed JSON, schema or validation error, bad flag)\n"
    "  3  infeasible (memory budget cannot be met; the operator id is named)\n";

struct Reporter {
  bool json = false;
  std::ostringstream err;

  void Emit(std::string_view level, std::string_view code,
            const std::string& message, std::optional<std::int64_t> node) {
    if (json) {
      Json j{{"level", level}, {"code", code}, {"message", message}};
      j["node"] = node ? Json(*node) : Json(nullptr);
      err << j.dump() << "\n";
      return;
    }
    err << level << ": [" << code << "] " << message;
    if (node) err << " (operator " << *node << ")";
    err << "\n";
  }

  void Warnings(const std::vector<Diagnostic>& warnings) {
    for (const auto& w : warnings) Emit("warning", w.code, w.message, w.node);
  }

  // Maps the in-flight exception to an exit code and reports it.
  int Fail(const std::string& context) {
    try {
      throw;
    } catch (const Error& e) {
      Emit("error", ErrorCodeName(e.code()), context + e.what(), e.node());
      return e.is_infeasibility() ? kExitInfeasible : kExitInvalid;
    } catch (const std::exception& e) {
      Emit("error", "Failure", context + e.what(), std::nullopt);
      return kExitFailure;
    }
  }
};

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

struct CompileOptions {
  std::vector<std::string> models;
  std::vector<std::string> clusters;
  std::string passes;
  std::string config;
  bool strict = false;
  int warmup = -1;
  std::string out = "out";
  int jobs = 1;
};

struct JobResult {
  int code = kExitOk;
  std::string out;
  std::string err;
};

JobResult CompileOne(const CompileOptions& opt, const std::string& model_path,
                     const std::string& cluster_path, const fs::path& out_dir,
                     bool json) {
  Reporter rep{json, {}};
  JobResult result;
  const std::string context = model_path + " x " + cluster_path + ": ";
  try {
    const Graph graph = ModelFromJson(ReadJsonFile(model_path));
    const ClusterSpec spec = ClusterFromJson(ReadJsonFile(cluster_path));
    PipelineConfig config;
    if (!opt.config.empty()) {
      config = PipelineConfigFromJson(ReadJsonFile(opt.config));
    }
    if (!opt.passes.empty()) config.passes = ParsePassList(opt.passes);
    if (opt.strict) config.prefetch_mode = PrefetchMode::kStrict;
    if (opt.warmup >= 0) config.warmup_iterations = opt.warmup;

    const PipelineResult r = run_pipeline(graph, spec.cluster, spec.cost, config);
    rep.Warnings(r.warnings);

    WriteTextFile(out_dir / "compiled_model.json", Dump(ModelToJson(r.graph)));
    WriteTextFile(out_dir / "schedule.json", Dump(ScheduleToJson(r.schedule)));
    WriteTextFile(out_dir / "stages.json", Dump(StageReportsToJson(r.stages)));
    WriteTextFile(out_dir / "warnings.jsonl", DiagnosticsJsonl(r.warnings));
    if (r.prefetch_log) {
      WriteTextFile(out_dir / "prefetch_log.jsonl", PrefetchLogJsonl(*r.prefetch_log));
    }
    if (r.unshard) {
      WriteTextFile(out_dir / "unshard_log.jsonl", UnshardLogJsonl(*r.unshard));
    }
    if (!r.offload_log.empty()) {
      WriteTextFile(out_dir / "offload_log.jsonl", OffloadLogJsonl(r.offload_log));
    }

    std::ostringstream os;
    os << "compiled " << model_path << " on " << cluster_path << " -> "
       << out_dir.string() << "\n";
    for (const auto& s : r.stages) {
      os << "  " << s.name << ": iteration_time_us=" << s.report.iteration_time_us
         << " peak_memory_bytes=" << s.report.peak_memory_bytes
         << " gathers=" << s.report.gather_count << "\n";
    }
    result.out = os.str();
  } catch (...) {
    result.code = rep.Fail(context);
  }
  result.err = rep.err.str();
  return result;
}

int RunCompile(const CompileOptions& opt, bool json, std::ostream& out,
               std::ostream& err) {
  struct Job {
    std::string model, cluster;
    fs::path dir;
  };
  std::vector<Job> jobs;
  const bool grid = opt.models.size() > 1 || opt.clusters.size() > 1;
  for (const auto& m : opt.models) {
    for (const auto& c : opt.clusters) {
      fs::path dir = opt.out;
      if (grid) {
        dir /= fs::path(m).stem().string() + "__" + fs::path(c).stem().string();
      }
      jobs.push_back({m, c, dir});
    }
  }
  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = CompileOne(opt, jobs[i].model, jobs[i].cluster, jobs[i].dir, json);
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opt.jobs)), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  for (const auto& r : results) {
    out << r.out;
    err << r.err;
    // The most severe outcome wins: failure over infeasible over invalid.
    auto rank = [](int c) {
      return c == kExitFailure ? 3 : c == kExitInfeasible ? 2 : c == kExitInvalid ? 1 : 0;
    };
    if (rank(r.code) > rank(code)) code = r.code;
  }
  return code;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"shardopt: schedule optimizer for fully sharded data-parallel "
               "training graphs"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "Emit diagnostics on stderr as JSON lines");

  // gen
  WorkloadSpec wl;
  std::string gen_out = "model.json";
  std::string param_bytes = "256MB", activation = "0", transient = "0";
  std::string cluster_out, device_memory = "80GB", reserve = "0",
                           memory_limit, prefetch_limit = "2GB", host_memory;
  int devices = 8;
  auto* gen = app.add_subcommand("gen", "Write a synthetic layered workload");
  gen->add_option("--out", gen_out, "Model JSON path")->capture_default_str();
  gen->add_option("--layers", wl.layers)->capture_default_str();
  gen->add_option("--compute-us", wl.compute_us, "Forward compute per layer")
      ->capture_default_str();
  gen->add_option("--param-bytes", param_bytes, "Parameter size per layer")
      ->capture_default_str();
  gen->add_option("--accumulation-steps", wl.accumulation_steps)->capture_default_str();
  gen->add_option("--optimizer-multiplier", wl.optimizer_multiplier)
      ->capture_default_str();
  gen->add_option("--activation-bytes", activation)->capture_default_str();
  gen->add_option("--transient-bytes", transient)->capture_default_str();
  gen->add_option("--backward-factor", wl.backward_factor)->capture_default_str();
  gen->add_option("--fragments", wl.fragment_count)->capture_default_str();
  gen->add_option("--optimizer-step-us", wl.optimizer_step_us)->capture_default_str();
  gen->add_flag("--forward-only", wl.forward_only);
  gen->add_option("--cluster-out", cluster_out, "Also write a cluster JSON here");
  gen->add_option("--devices", devices)->capture_default_str();
  gen->add_option("--device-memory", device_memory)->capture_default_str();
  gen->add_option("--reserve", reserve, "Runtime reserve")->capture_default_str();
  gen->add_option("--memory-limit", memory_limit, "Default: 90% of usable memory");
  gen->add_option("--prefetch-limit", prefetch_limit)->capture_default_str();
  gen->add_option("--host-memory", host_memory, "Default: unlimited");

  // compile
  CompileOptions copt;
  auto* compile = app.add_subcommand("compile", "Run the optimization pipeline");
  compile->add_option("--model", copt.models, "Model JSON (repeatable)")->required();
  compile->add_option("--cluster", copt.clusters, "Cluster JSON (repeatable)")
      ->required();
  compile->add_option("--passes", copt.passes,
                      "Comma-separated: shard,prefetch,unshard,offload");
  compile->add_option("--config", copt.config, "Pipeline config JSON");
  compile->add_flag("--strict", copt.strict, "Strict prefetch memory checks");
  compile->add_option("--warmup", copt.warmup, "Warm-up iterations")
      ->check(CLI::NonNegativeNumber);
  compile->add_option("--out", copt.out, "Output directory")->capture_default_str();
  compile->add_option("--jobs", copt.jobs, "Parallel grid points")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // simulate
  std::string sim_schedule, sim_model, sim_cluster, sim_out = "sim";
  std::optional<bool> resident;
  auto* sim = app.add_subcommand("simulate", "Simulate a schedule");
  sim->add_option("--schedule", sim_schedule)->required();
  sim->add_option("--model", sim_model, "Model JSON matching the schedule")->required();
  sim->add_option("--cluster", sim_cluster)->required();
  sim->add_option("--out", sim_out, "Output directory")->capture_default_str();
  sim->add_option("--resident", resident,
                  "Optimizer states resident at start (default: when the "
                  "schedule was produced by the offload pass)");

  // report
  std::vector<std::string> report_inputs;
  std::string report_out = "report.json";
  auto* report = app.add_subcommand("report", "Compare stage reports");
  report->add_option("stages", report_inputs, "stages.json files")->required();
  report->add_option("--out", report_out, "Comparison JSON path")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  Reporter rep{json, {}};
  int code = kExitOk;
  if (*compile) {
    return RunCompile(copt, json, out, err);
  }
  try {
    if (*gen) {
      wl.param_bytes = ParseSize(param_bytes);
      wl.activation_bytes = ParseSize(activation);
      wl.transient_bytes = ParseSize(transient);
      const Graph g = generate_workload(wl);
      WriteTextFile(gen_out, Dump(ModelToJson(g)));
      out << "wrote " << gen_out << " (" << g.nodes().size() << " nodes)\n";
      if (!cluster_out.empty()) {
        ClusterSpec spec;
        spec.cluster = ClusterConfig::WithDefaults(devices, ParseSize(device_memory));
        spec.cluster.runtime_reserve_bytes = ParseSize(reserve);
        spec.cluster.memory_limit_bytes =
            memory_limit.empty() ? spec.cluster.usable_device_bytes() / 10 * 9
                                 : ParseSize(memory_limit);
        spec.cluster.prefetch_limit_bytes = ParseSize(prefetch_limit);
        spec.cluster.accumulation_steps = wl.accumulation_steps;
        if (!host_memory.empty()) spec.cluster.host_memory_bytes = ParseSize(host_memory);
        spec.cluster.Validate();
        WriteTextFile(cluster_out, Dump(ClusterToJson(spec)));
        out << "wrote " << cluster_out << "\n";
      }
    } else if (*sim) {
      const Graph g = ModelFromJson(ReadJsonFile(sim_model));
      const ClusterSpec spec = ClusterFromJson(ReadJsonFile(sim_cluster));
      const Schedule s = ScheduleFromJson(ReadJsonFile(sim_schedule));
      SimOptions options;
      options.optimizer_state_resident =
          resident.value_or(std::find(s.provenance.begin(), s.provenance.end(),
                                      "offload") != s.provenance.end());
      const SimReport r = simulate(g, s, spec.cost, spec.cluster, options);
      const fs::path dir = sim_out;
      WriteTextFile(dir / "report.json", Dump(SimReportToJson(r, false)));
      WriteTextFile(dir / "timeline.csv", TimelineCsv(r));
      WriteTextFile(dir / "memory.csv", MemoryTraceCsv(r));
      out << "iteration_time_us=" << r.iteration_time_us
          << " peak_memory_bytes=" << r.peak_memory_bytes
          << " overlap_fraction=" << r.overlap_fraction << "\n";
      for (const auto& o : r.overflows) {
        rep.Emit("warning", "MemoryOverflow",
                 "resident " + std::to_string(o.resident_bytes) +
                     " bytes exceeds usable device memory at t=" +
                     std::to_string(o.time_us) + "us",
                 o.node);
      }
    } else if (*report) {
      std::vector<ComparisonRow> rows;
      for (const auto& path : report_inputs) {
        const fs::path p = path;
        std::string name = p.parent_path().filename().string();
        if (name.empty()) name = p.stem().string();
        const auto part = ComparisonRows(name, ReadJsonFile(p));
        rows.insert(rows.end(), part.begin(), part.end());
      }
      out << ComparisonTable(rows);
      WriteTextFile(report_out, Dump(ComparisonJson(rows)));
    }
  } catch (...) {
    code = rep.Fail("");
  }
  err << rep.err.str();
  return code;
}

}  // namespace shardopt
