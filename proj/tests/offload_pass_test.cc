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
#include "shardopt/offload_pass.h"
#include "shardopt/simulator.h"
#include "test_support.h"

namespace shardopt {
namespace {

Node Compute(NodeId id, std::vector<NodeId> deps = {}) {
  Node n;
  n.id = id;
  n.duration_us = 100;
  n.deps = std::move(deps);
  return n;
}

// Chain of compute nodes 0..count-1.
std::vector<Node> Chain(int count) {
  std::vector<Node> nodes;
  for (NodeId i = 0; i < count; ++i) {
    nodes.push_back(Compute(i, i ? std::vector<NodeId>{i - 1} : std::vector<NodeId>{}));
  }
  return nodes;
}

std::vector<OptimizerStateFragment> Fragments(int count, std::int64_t size) {
  std::vector<OptimizerStateFragment> out;
  for (int f = 0; f < count; ++f) out.push_back({f, size});
  return out;
}

// Profile with optimizer states resident: `base` excludes them.
MemoryProfile Resident(const std::vector<std::int64_t>& base, std::int64_t opt) {
  MemoryProfile p;
  p.optimizer_allocated = true;
  p.optimizer_bytes = opt;
  for (std::size_t i = 0; i < base.size(); ++i) {
    p.before[static_cast<NodeId>(i)] = base[i] + opt;
    p.across[static_cast<NodeId>(i)] = base[i] + opt;
    p.peak_bytes = std::max(p.peak_bytes, base[i] + opt);
  }
  return p;
}

std::vector<OffloadEventKind> SyncsBefore(const OffloadResult& r, NodeId node) {
  std::vector<OffloadEventKind> out;
  for (const auto& e : r.log) {
    if (e.node == node && e.kind == OffloadEventKind::kSync) out.push_back(e.kind);
  }
  return out;
}

TEST(OffloadForwardTest, FitsWithoutOffloading) {
  const auto frags = Fragments(4, 10);
  const Graph g({}, frags, Chain(3));
  const Schedule s = InitialSchedule(g);
  const auto r = apply_offload_forward(g, s, Resident({20, 50, 60}, 40), frags,
                                       testing::Budget(100, 100));
  EXPECT_TRUE(r.offloaded.empty());
  EXPECT_EQ(r.schedule.order, s.order);
}

TEST(OffloadForwardTest, MinimalFragmentCount) {
  // 60 + 60 - x <= 100 needs x >= 20: two fragments of 10.
  const auto frags = Fragments(6, 10);
  const Graph g({}, frags, Chain(2));
  const auto r = apply_offload_forward(g, InitialSchedule(g), Resident({0, 60}, 60),
                                       frags, testing::Budget(100, 100));
  EXPECT_EQ(r.offloaded, (std::vector<FragmentId>{0, 1}));
  EXPECT_EQ(r.peak_bytes, 60);
  EXPECT_EQ(r.optimizer_bytes, 60);
  EXPECT_EQ(SyncsBefore(r, 1).size(), 2u);
  EXPECT_TRUE(validate(r.graph, r.schedule).empty());
}

TEST(OffloadForwardTest, RisingProfileFreesJustInTime) {
  // P = {20, 50, 80}, M_opt = 40, M = 100: o1 and o2 fit (60, 90); o3 needs
  // 80 + 40 - x <= 100, so two 10-byte fragments are freed right before it.
  const auto frags = Fragments(4, 10);
  const Graph g({}, frags, Chain(3));
  const auto r = apply_offload_forward(g, InitialSchedule(g),
                                       Resident({20, 50, 80}, 40), frags,
                                       testing::Budget(100, 100));
  EXPECT_EQ(r.offloaded.size(), 2u);
  EXPECT_TRUE(SyncsBefore(r, 0).empty());
  EXPECT_TRUE(SyncsBefore(r, 1).empty());
  EXPECT_EQ(SyncsBefore(r, 2).size(), 2u);
  for (const auto& e : r.log) {
    if (e.kind == OffloadEventKind::kCheck) {
      EXPECT_LE(e.p_mem + r.optimizer_bytes - e.freed, 100) << e.node;
    }
  }
  // [off0, off1, o1, o2, sync0, sync1, o3]
  ASSERT_EQ(r.schedule.size(), 7u);
  EXPECT_EQ(r.schedule.order[2], 0);
  EXPECT_EQ(r.schedule.order[6], 2);
  EXPECT_EQ(r.graph.node(r.schedule.order[4]).kind, NodeKind::kTransferSync);
}

TEST(OffloadForwardTest, UnallocatedStatesNeedNothing) {
  const auto frags = Fragments(4, 10);
  const Graph g({}, frags, Chain(3));
  MemoryProfile p = Resident({20, 50, 80}, 0);
  p.optimizer_allocated = false;
  const auto r = apply_offload_forward(g, InitialSchedule(g), p, frags,
                                       testing::Budget(100, 100));
  EXPECT_TRUE(r.offloaded.empty());
  EXPECT_EQ(r.optimizer_bytes, 0);
}

TEST(OffloadForwardTest, InfeasibleNamesTheOperator) {
  const auto frags = Fragments(2, 10);
  const Graph g({}, frags, Chain(3));
  try {
    apply_offload_forward(g, InitialSchedule(g), Resident({20, 120, 30}, 20), frags,
                          testing::Budget(100, 100));
    FAIL() << "expected Infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    EXPECT_EQ(e.node(), 1);
    EXPECT_TRUE(e.is_infeasibility());
  }
}

TEST(OffloadForwardTest, HostCapacity) {
  const auto frags = Fragments(6, 10);
  const Graph g({}, frags, Chain(2));
  ClusterConfig cluster = testing::Budget(100, 100);
  cluster.host_memory_bytes = 15;
  try {
    apply_offload_forward(g, InitialSchedule(g), Resident({0, 60}, 60), frags, cluster);
    FAIL() << "expected InsufficientHostCapacity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientHostCapacity);
  }
}

// [off0 (10), sync0 (11), off1 (12), sync1 (13), bwd_begin (0), b1..b4
// (1..4), step (5)] with 20-byte fragments.
struct ReloadFixture {
  Graph graph;
  Schedule schedule;
};

ReloadFixture Backward() {
  std::vector<Node> nodes;
  Node marker;
  marker.id = 0;
  marker.kind = NodeKind::kMarker;
  marker.marker = MarkerKind::kBackwardBegin;
  nodes.push_back(marker);
  for (NodeId i = 1; i <= 4; ++i) nodes.push_back(Compute(i, {i - 1}));
  Node step;
  step.id = 5;
  step.kind = NodeKind::kOptimizerStep;
  step.duration_us = 10;
  step.deps = {4};
  nodes.push_back(step);
  for (FragmentId f = 0; f < 2; ++f) {
    Node off;
    off.id = 10 + 2 * f;
    off.kind = NodeKind::kOffloadStart;
    off.refs = {f};
    Node sync;
    sync.id = 11 + 2 * f;
    sync.kind = NodeKind::kTransferSync;
    sync.refs = {f};
    sync.deps = {off.id};
    nodes.push_back(off);
    nodes.push_back(sync);
  }
  Graph g({}, Fragments(2, 20), nodes);
  return {g, Schedule{{10, 11, 12, 13, 0, 1, 2, 3, 4, 5}, {}}};
}

MemoryProfile BackwardProfile(std::vector<std::int64_t> backward) {
  // Entries for 0..5, then the transfers at the front.
  MemoryProfile p;
  for (std::size_t i = 0; i < backward.size(); ++i) {
    p.before[static_cast<NodeId>(i)] = backward[i];
    p.across[static_cast<NodeId>(i)] = backward[i];
  }
  for (NodeId id : {10, 11, 12, 13}) {
    p.before[id] = backward.front();
    p.across[id] = backward.front();
  }
  return p;
}

TEST(ReloadBackwardTest, NothingOffloaded) {
  const auto fx = Backward();
  const auto r = apply_reload_backward(fx.graph, fx.schedule,
                                       BackwardProfile({90, 90, 70, 50, 30, 30}), {},
                                       testing::Budget(100, 100));
  EXPECT_EQ(r.schedule.order, fx.schedule.order);
}

TEST(ReloadBackwardTest, DecliningProfileReloadsAtFirstHeadroom) {
  // Suffix maxima from b1: 90, 70, 50, 30. Fragment 1 (20 bytes) fits from
  // b2 (70 + 20 <= 100); fragment 0 then needs 40 bytes of headroom, first
  // available at b3 (50 + 40).
  const auto fx = Backward();
  const std::vector<FragmentId> offloaded = {0, 1};
  const auto r = apply_reload_backward(fx.graph, fx.schedule,
                                       BackwardProfile({90, 90, 70, 50, 30, 30}),
                                       offloaded, testing::Budget(100, 100));
  EXPECT_TRUE(r.warnings.empty());
  ASSERT_TRUE(validate(r.graph, r.schedule).empty());
  std::vector<NodeKind> kinds;
  for (NodeId id : r.schedule.order) kinds.push_back(r.graph.node(id).kind);
  using K = NodeKind;
  EXPECT_EQ(kinds, (std::vector<K>{K::kOffloadStart, K::kTransferSync, K::kOffloadStart,
                                   K::kTransferSync, K::kMarker, K::kCompute,
                                   K::kReloadStart, K::kCompute, K::kReloadStart,
                                   K::kCompute, K::kCompute, K::kTransferSync,
                                   K::kTransferSync, K::kOptimizerStep}));
  EXPECT_EQ(r.graph.node(r.schedule.order[6]).refs, (std::vector<std::int64_t>{1}));
  EXPECT_EQ(r.graph.node(r.schedule.order[8]).refs, (std::vector<std::int64_t>{0}));
  EXPECT_EQ(r.graph.node(5).deps.size(), 3u);
}

TEST(ReloadBackwardTest, FlatProfileFallsBack) {
  const auto fx = Backward();
  const std::vector<FragmentId> offloaded = {0, 1};
  const auto r = apply_reload_backward(fx.graph, fx.schedule,
                                       BackwardProfile({100, 100, 100, 100, 100, 100}),
                                       offloaded, testing::Budget(100, 100));
  ASSERT_EQ(r.warnings.size(), 2u);
  EXPECT_EQ(r.warnings[0].code, "ReloadInfeasible");
  for (const auto& e : r.log) {
    if (e.kind == OffloadEventKind::kReload) ADD_FAILURE() << "async reload";
  }
  // Reloads and their syncs sit right before the optimizer step.
  const auto& order = r.schedule.order;
  EXPECT_EQ(order.back(), 5);
  EXPECT_EQ(r.graph.node(order[order.size() - 2]).kind, NodeKind::kTransferSync);
  EXPECT_EQ(r.graph.node(order[order.size() - 5]).kind, NodeKind::kReloadStart);
  EXPECT_TRUE(validate(r.graph, r.schedule).empty());
}

TEST(SynchronousOffloadTest, FrontAndBack) {
  const auto frags = Fragments(2, 10);
  std::vector<Node> nodes = Chain(2);
  Node step;
  step.id = 2;
  step.kind = NodeKind::kOptimizerStep;
  step.deps = {1};
  nodes.push_back(step);
  const Graph g({}, frags, nodes);
  const std::vector<FragmentId> all = {0, 1};
  const auto r = synchronous_offload(g, InitialSchedule(g), all);
  std::vector<NodeKind> kinds;
  for (NodeId id : r.schedule.order) kinds.push_back(r.graph.node(id).kind);
  using K = NodeKind;
  EXPECT_EQ(kinds, (std::vector<K>{K::kOffloadStart, K::kOffloadStart, K::kTransferSync,
                                   K::kTransferSync, K::kCompute, K::kCompute,
                                   K::kReloadStart, K::kReloadStart, K::kTransferSync,
                                   K::kTransferSync, K::kOptimizerStep}));
  EXPECT_TRUE(validate(r.graph, r.schedule).empty());
}

}  // namespace
}  // namespace shardopt
