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

#include "gtest/gtest.h"
#include "shardopt/error.h"
#include "shardopt/pipeline.h"
#include "shardopt/shard_pass.h"
#include "shardopt/simulator.h"
#include "shardopt/workload.h"
#include "test_support.h"

namespace shardopt {
namespace {

using testing::kMB;

bool HasWarning(const PipelineResult& r, const std::string& code) {
  for (const auto& w : r.warnings) {
    if (w.code == code) return true;
  }
  return false;
}

Graph Layered(int layers, int steps) {
  WorkloadSpec spec;
  spec.layers = layers;
  spec.accumulation_steps = steps;
  spec.param_bytes = 100 * kMB;
  spec.compute_us = 4000;
  spec.activation_bytes = 50 * kMB;
  return generate_workload(spec);
}

TEST(ParsePassListTest, NamesAndErrors) {
  EXPECT_EQ(ParsePassList("shard,prefetch,unshard,offload"),
            (std::vector<PassKind>{PassKind::kShard, PassKind::kPrefetch,
                                   PassKind::kUnshard, PassKind::kOffload}));
  EXPECT_TRUE(ParsePassList("").empty());
  EXPECT_THROW(ParsePassList("shard,fuse"), Error);
  EXPECT_THROW(ParsePassList("shard,shard"), Error);
}

TEST(PipelineTest, ShardOnlyMatchesDirectCalls) {
  const Graph g = Layered(4, 1);
  const auto cluster = testing::Budget(8 * kGiB, 2 * kGiB);
  const auto cost = testing::DefaultCost();
  PipelineConfig config;
  config.passes = {PassKind::kShard};
  config.warmup_iterations = 0;
  const PipelineResult r = run_pipeline(g, cluster, cost, config);
  const PassResult direct = apply_sharding(g, InitialSchedule(g), cluster);
  EXPECT_EQ(r.schedule, direct.schedule);
  ASSERT_EQ(r.stages.size(), 2u);
  EXPECT_EQ(r.stages[0].name, "baseline");
  EXPECT_EQ(r.stages[1].report, simulate(direct.graph, direct.schedule, cost, cluster));
}

TEST(PipelineTest, StagesNeverSlowDown) {
  const auto cost = testing::DefaultCost();
  const auto cluster = testing::Budget(8 * kGiB, 2 * kGiB);
  for (int steps : {1, 2, 4}) {
    const PipelineResult r = run_pipeline(Layered(6, steps), cluster, cost, {});
    ASSERT_EQ(r.stages.size(), 5u);  // baseline, shard, prefetch, unshard, warmup
    EXPECT_EQ(r.stages[1].name, "shard");
    EXPECT_LE(r.stages[2].report.iteration_time_us, r.stages[1].report.iteration_time_us);
    EXPECT_LE(r.stages[3].report.iteration_time_us, r.stages[2].report.iteration_time_us);
    EXPECT_TRUE(validate(r.graph, r.schedule).empty());
    EXPECT_FALSE(HasWarning(r, "OrderWarning"));
  }
}

TEST(PipelineTest, UnshardBeforePrefetchWarns) {
  PipelineConfig config;
  config.passes = {PassKind::kShard, PassKind::kUnshard, PassKind::kPrefetch};
  const PipelineResult r = run_pipeline(Layered(4, 2), testing::Budget(8 * kGiB, 2 * kGiB),
                                        testing::DefaultCost(), config);
  EXPECT_TRUE(HasWarning(r, "OrderWarning"));
  EXPECT_TRUE(validate(r.graph, r.schedule).empty());
  EXPECT_TRUE(testing::CheckPlacement(r.graph, r.schedule).empty());
}

TEST(PipelineTest, ShardMustComeFirst) {
  PipelineConfig config;
  config.passes = {PassKind::kPrefetch, PassKind::kShard};
  EXPECT_THROW(run_pipeline(Layered(2, 1), testing::Budget(8 * kGiB, 2 * kGiB),
                            testing::DefaultCost(), config),
               Error);
  config.passes = {PassKind::kShard, PassKind::kPrefetch, PassKind::kPrefetch};
  EXPECT_THROW(run_pipeline(Layered(2, 1), testing::Budget(8 * kGiB, 2 * kGiB),
                            testing::DefaultCost(), config),
               Error);
}

TEST(PipelineTest, OffloadWaitsForOptimizerAllocation) {
  // Sharded peak (350 MB) plus 800 MB of optimizer state exceeds M, while
  // the optimizer step itself (50 MB of shards + 800 MB) fits.
  const Graph g = Layered(4, 1);
  const auto cost = testing::DefaultCost();
  PipelineConfig config;
  config.passes = {PassKind::kShard, PassKind::kOffload};
  config.warmup_iterations = 0;
  const auto shard_only = run_pipeline(g, testing::Budget(8 * kGiB, 2 * kGiB), cost,
                                       {.passes = {PassKind::kShard}, .warmup_iterations = 0});
  const std::int64_t peak = shard_only.stages.back().profile_peak_bytes;
  const std::int64_t opt = g.total_fragment_bytes();
  const auto cluster = testing::Budget(peak + opt - 200 * kMB, 2 * kGiB);

  const PipelineResult cold = run_pipeline(g, cluster, cost, config);
  EXPECT_TRUE(cold.offloaded.empty());

  config.warmup_iterations = 5;
  const PipelineResult warm = run_pipeline(g, cluster, cost, config);
  EXPECT_FALSE(warm.offloaded.empty());
  EXPECT_EQ(warm.stages.back().name, "offload");
  EXPECT_TRUE(warm.stages.back().optimizer_resident);
  EXPECT_TRUE(warm.warnings.empty());
  EXPECT_LE(warm.stages.back().report.peak_memory_bytes, cluster.memory_limit_bytes);
  EXPECT_TRUE(validate(warm.graph, warm.schedule).empty());
}

TEST(PipelineTest, OffloadNotLastWarns) {
  PipelineConfig config;
  config.passes = {PassKind::kShard, PassKind::kOffload, PassKind::kPrefetch};
  const PipelineResult r = run_pipeline(Layered(2, 1), testing::Budget(8 * kGiB, 2 * kGiB),
                                        testing::DefaultCost(), config);
  EXPECT_TRUE(HasWarning(r, "OrderWarning"));
}

TEST(PipelineTest, ErrorsNameTheStage) {
  // Every gather alone overflows M: prefetching reports an infeasible
  // baseline.
  const Graph g = Layered(2, 1);
  try {
    run_pipeline(g, testing::Budget(50 * kMB, 2 * kGiB), testing::DefaultCost(), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleBaseline);
    EXPECT_EQ(std::string(e.what()).rfind("prefetch: ", 0), 0u) << e.what();
  }
}

}  // namespace
}  // namespace shardopt
