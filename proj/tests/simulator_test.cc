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

#include <random>

#include "gtest/gtest.h"
#include "shardopt/error.h"
#include "shardopt/pipeline.h"
#include "shardopt/prefetch_pass.h"
#include "shardopt/shard_pass.h"
#include "shardopt/simulator.h"
#include "shardopt/workload.h"
#include "test_support.h"

namespace shardopt {
namespace {

using testing::kMB;

// Forward-only layered graph whose gathers take exactly 5 ms:
// 100 µs + 196 MB / 40 GB/s.
Graph FivePlusTen() {
  WorkloadSpec spec;
  spec.layers = 16;
  spec.compute_us = 10'000;
  spec.param_bytes = 196'000'000;
  spec.forward_only = true;
  return generate_workload(spec);
}

TEST(SimulatorTest, EmptySchedule) {
  const SimReport r = simulate(Graph(), Schedule(), testing::DefaultCost(),
                               testing::Budget(kGiB, kGiB));
  EXPECT_EQ(r.iteration_time_us, 0);
  EXPECT_EQ(r.peak_memory_bytes, 0);
}

TEST(SimulatorTest, SerialGatherComputeIs240ms) {
  const ClusterConfig cluster = testing::Budget(64 * kGiB, 64 * kGiB);
  const Graph g = FivePlusTen();
  const PassResult sharded = apply_sharding(g, InitialSchedule(g), cluster);
  const SimReport r =
      simulate(sharded.graph, sharded.schedule, testing::DefaultCost(), cluster);
  EXPECT_EQ(r.iteration_time_us, 240'000);
  EXPECT_EQ(r.gather_count, 16);
  EXPECT_EQ(r.overlap_fraction, 0.0);
}

TEST(SimulatorTest, PrefetchedGathersHideBehindCompute) {
  const ClusterConfig cluster = testing::Budget(64 * kGiB, 64 * kGiB);
  const CostModel cost = testing::DefaultCost();
  const Graph g = FivePlusTen();
  const PassResult sharded = apply_sharding(g, InitialSchedule(g), cluster);
  const auto prof = profile(sharded.graph, sharded.schedule, cost, cluster);
  const PrefetchResult pf =
      apply_prefetch(sharded.graph, sharded.schedule, prof, cluster, cost);
  const SimReport r = simulate(pf.graph, pf.schedule, cost, cluster);
  // First gather 5 ms, then 16 x 10 ms of compute.
  EXPECT_EQ(r.iteration_time_us, 165'000);
  // Gathers 2..16 (75 ms) overlap compute; gather 1 (5 ms) does not.
  EXPECT_DOUBLE_EQ(r.overlap_fraction, 75.0 / 80.0);
}

TEST(SimulatorTest, StreamsAndIssueOrder) {
  // gather(4 MB) -> compute(1000) -> release, then an unrelated compute.
  Node g;
  g.id = 0;
  g.kind = NodeKind::kAllGather;
  g.refs = {0};
  Node c;
  c.id = 1;
  c.duration_us = 1000;
  c.refs = {0};
  c.deps = {0};
  Node r;
  r.id = 2;
  r.kind = NodeKind::kRelease;
  r.refs = {0};
  r.deps = {1};
  Node d;
  d.id = 3;
  d.duration_us = 50;
  const Graph graph({{0, 4 * kMB, 4}}, {}, {g, c, r, d});
  const SimReport rep = simulate(graph, Schedule{{0, 1, 2, 3}, {}},
                                 testing::DefaultCost(), testing::Budget(kGiB, kGiB));
  EXPECT_EQ(rep.event(0).start_us, 0);
  EXPECT_EQ(rep.event(0).end_us, 200);
  EXPECT_EQ(rep.event(1).start_us, 200);
  EXPECT_EQ(rep.event(2).end_us, 1200);
  EXPECT_EQ(rep.event(3).start_us, 1200);
  EXPECT_EQ(rep.iteration_time_us, 1250);
  EXPECT_EQ(rep.initial_memory_bytes, kMB);
  EXPECT_EQ(rep.peak_memory_bytes, 5 * kMB);
  EXPECT_EQ(rep.final_memory_bytes, kMB);
}

TEST(SimulatorTest, ReportsOverflowAgainstUsableMemory) {
  Node c;
  c.id = 0;
  c.duration_us = 10;
  c.transient_bytes = 100;
  const Graph graph({}, {}, {c});
  ClusterConfig cluster = testing::Budget(60, 60);
  cluster.device_memory_bytes = 100;
  cluster.runtime_reserve_bytes = 20;
  const SimReport r =
      simulate(graph, InitialSchedule(graph), testing::DefaultCost(), cluster);
  ASSERT_EQ(r.overflows.size(), 1u);
  EXPECT_EQ(r.overflows[0].node, 0);
  EXPECT_EQ(r.overflows[0].resident_bytes, 100);
}

TEST(SimulatorTest, RejectsInvalidSchedule) {
  Node a;
  a.id = 0;
  Node b;
  b.id = 1;
  b.deps = {0};
  const Graph graph({}, {}, {a, b});
  EXPECT_THROW(simulate(graph, Schedule{{1, 0}, {}}, testing::DefaultCost(),
                        testing::Budget(kGiB, kGiB)),
               Error);
}

TEST(ProfileTest, InitialResidencyAndPrefixSums) {
  std::vector<Node> nodes;
  for (NodeId i = 0; i < 5; ++i) {
    Node n;
    n.id = i;
    n.duration_us = 1;
    n.persistent_delta_bytes = 10;
    if (i > 0) n.deps = {i - 1};
    nodes.push_back(n);
  }
  const Graph g({{0, 100, 8}}, {{0, 40}}, nodes);
  const Schedule s = InitialSchedule(g);
  const auto cost = testing::DefaultCost();
  const auto cluster = testing::Budget(kGiB, kGiB);
  const MemoryProfile p = profile(g, s, cost, cluster);
  // ceil(100 / 8) = 13 bytes of shard.
  for (NodeId i = 0; i < 5; ++i) EXPECT_EQ(p.at(i), 13 + 10 * i);
  EXPECT_EQ(p.peak_bytes, 63);
  EXPECT_FALSE(p.optimizer_allocated);
  EXPECT_THROW(p.at(99), Error);

  const MemoryProfile resident =
      profile(g, s, cost, cluster, {.optimizer_state_resident = true});
  EXPECT_EQ(resident.at(0), 53);
  EXPECT_EQ(resident.optimizer_bytes, 40);
}

TEST(ProfileTest, SimulatedPeakNeverExceedsProfiledPeak) {
  std::mt19937_64 rng(11);
  const CostModel cost = testing::DefaultCost();
  for (int trial = 0; trial < 300; ++trial) {
    auto spec = testing::RandomLayeredSpec(rng);
    spec.forward_only = false;
    const Graph g = trial % 2 ? testing::RandomDag(rng) : testing::BuildLayered(spec);
    const ClusterConfig cluster = testing::Budget(64 * kGiB, 256 * kMB);
    PipelineConfig config;
    config.passes = {PassKind::kShard, PassKind::kPrefetch, PassKind::kUnshard,
                     PassKind::kOffload};
    config.warmup_iterations = 1;
    const PipelineResult r = run_pipeline(g, cluster, cost, config);
    for (const auto& stage : r.stages) {
      ASSERT_LE(stage.report.peak_memory_bytes, stage.profile_peak_bytes)
          << "trial " << trial << " stage " << stage.name;
    }
  }
}

TEST(SimulatorTest, Deterministic) {
  std::mt19937_64 rng(3);
  const Graph g = testing::RandomDag(rng);
  const Schedule s = testing::RandomTopologicalSchedule(g, rng);
  const auto cluster = testing::Budget(kGiB, kGiB);
  EXPECT_EQ(simulate(g, s, testing::DefaultCost(), cluster),
            simulate(g, s, testing::DefaultCost(), cluster));
}

}  // namespace
}  // namespace shardopt
