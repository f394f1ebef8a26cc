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
#include "shardopt/cost_model.h"
#include "shardopt/error.h"
#include "test_support.h"

namespace shardopt {
namespace {

using testing::kMB;

TEST(CostModelTest, AffineTimes) {
  const CostModel cost = testing::DefaultCost();
  EXPECT_DOUBLE_EQ(cost.comm_time(0), 100.0);
  EXPECT_DOUBLE_EQ(cost.comm_time(4 * kMB), 200.0);
  EXPECT_DOUBLE_EQ(cost.host_transfer_time(20 * kMB), 1010.0);
  // 100 + 20000 / 40000 = 100.5 rounds away from zero.
  EXPECT_EQ(cost.comm_time_us(20'000), 101);
  EXPECT_EQ(cost.comm_time_us(196'000'000), 5000);
}

TEST(CostModelTest, PiecewiseTable) {
  const CostModel cost(100.0, 40e9, 10.0, 20e9,
                       {{1 * kMB, 125.0}, {2 * kMB, 150.0}});
  EXPECT_DOUBLE_EQ(cost.comm_time(1'500'000), 137.5);
  EXPECT_DOUBLE_EQ(cost.comm_time(1 * kMB), 125.0);
  EXPECT_DOUBLE_EQ(cost.comm_time(0), 125.0);
  EXPECT_DOUBLE_EQ(cost.comm_time(3 * kMB), 175.0);
}

TEST(CostModelTest, RejectsBadParameters) {
  EXPECT_THROW(CostModel(-1.0, 40e9, 10.0, 20e9), Error);
  EXPECT_THROW(CostModel(100.0, 0.0, 10.0, 20e9), Error);
  EXPECT_THROW(CostModel(100.0, 40e9, 10.0, 20e9, {{1, 1.0}}), Error);
  EXPECT_THROW(CostModel(100.0, 40e9, 10.0, 20e9, {{2, 1.0}, {1, 2.0}}), Error);
}

TEST(CostModelTest, BufferIsUnshardedSize) {
  const Parameter p{0, 8 * kGiB, 8};
  EXPECT_EQ(allgather_buffer_size(p), 8 * kGiB);
  EXPECT_EQ(p.sharded_bytes(), kGiB);
}

TEST(ShouldFuseTest, Examples) {
  const CostModel cost = testing::DefaultCost();
  // 125 + 125 = 250 > 1.5 * 150 = 225.
  EXPECT_TRUE(cost.should_fuse(1 * kMB, 1 * kMB, 1.5));
  // 200 + 200 = 400 <= 1.5 * 300 = 450.
  EXPECT_FALSE(cost.should_fuse(4 * kMB, 4 * kMB, 1.5));
}

TEST(ShouldFuseTest, ClosedFormBoundary) {
  // 2(b + V/B) > a(b + 2V/B)  <=>  V < B b (2 - a) / (2 (a - 1)) = 2 MB.
  const CostModel cost = testing::DefaultCost();
  EXPECT_TRUE(cost.should_fuse(1'999'999, 1'999'999, 1.5));
  EXPECT_FALSE(cost.should_fuse(2'000'000, 2'000'000, 1.5));
}

TEST(ClusterConfigTest, DefaultsAndValidation) {
  const ClusterConfig c = ClusterConfig::WithDefaults(8, 80 * kGiB);
  EXPECT_EQ(c.memory_limit_bytes, 72 * kGiB);
  EXPECT_EQ(c.prefetch_limit_bytes, 2 * kGiB);
  EXPECT_NO_THROW(c.Validate());
  ClusterConfig bad = c;
  bad.fusion_threshold = 0.5;
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.memory_limit_bytes = 0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.runtime_reserve_bytes = c.device_memory_bytes;
  EXPECT_THROW(bad.Validate(), Error);
}

}  // namespace
}  // namespace shardopt
