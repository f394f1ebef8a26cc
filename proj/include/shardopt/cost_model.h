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

// Communication and host-transfer cost model plus cluster limits. All size
// arithmetic shared by the passes and the simulator lives here.

#ifndef SHARDOPT_COST_MODEL_H_
#define SHARDOPT_COST_MODEL_H_

#include <cstdint>
#include <utility>
#include <vector>

#include "shardopt/graph.h"

namespace shardopt {

struct CostPoint {
  std::int64_t bytes = 0;
  double time_us = 0.0;

  bool operator==(const CostPoint&) const = default;
};

class CostModel {
 public:
  // Affine model: latency + bytes / bandwidth. Bandwidths are bytes/second.
  CostModel(double collective_latency_us, double collective_bandwidth,
            double host_transfer_latency_us, double host_transfer_bandwidth,
            std::vector<CostPoint> collective_table = {});

  double collective_latency_us() const { return collective_latency_us_; }
  double collective_bandwidth() const { return collective_bandwidth_; }
  double host_transfer_latency_us() const { return host_latency_us_; }
  double host_transfer_bandwidth() const { return host_bandwidth_; }
  const std::vector<CostPoint>& collective_table() const { return table_; }

  // Collective time for a message of `bytes`. With a table, interpolates
  // linearly between points, holds the first point's time below it, and
  // extends the last segment's slope beyond the last point.
  double comm_time(std::int64_t bytes) const;
  double host_transfer_time(std::int64_t bytes) const;

  // Integer microseconds for the simulator (round half away from zero).
  std::int64_t comm_time_us(std::int64_t bytes) const;
  std::int64_t host_transfer_time_us(std::int64_t bytes) const;

  // Merging two collectives pays off when
  //   T(v1) + T(v2) > alpha * T(v1 + v2).
  bool should_fuse(std::int64_t v1, std::int64_t v2, double alpha) const;

  bool operator==(const CostModel&) const = default;

 private:
  double collective_latency_us_;
  double collective_bandwidth_;
  double host_latency_us_;
  double host_bandwidth_;
  std::vector<CostPoint> table_;
};

// Buffer materialized on each device by gathering `param`: the full
// unsharded tensor.
std::int64_t allgather_buffer_size(const Parameter& param);

inline constexpr std::int64_t kGiB = std::int64_t{1} << 30;

struct ClusterConfig {
  int device_count = 1;
  std::int64_t device_memory_bytes = 80 * kGiB;
  // Bytes held back for driver and communication-library buffers.
  std::int64_t runtime_reserve_bytes = 0;
  std::int64_t memory_limit_bytes = 0;    // M
  std::int64_t prefetch_limit_bytes = 0;  // M_prefetch
  double fusion_threshold = 1.5;          // alpha
  int accumulation_steps = 1;             // n
  std::int64_t host_memory_bytes = INT64_MAX;

  // Fills M with 90% of the usable device memory and M_prefetch with 2 GiB.
  static ClusterConfig WithDefaults(int device_count,
                                    std::int64_t device_memory_bytes);

  std::int64_t usable_device_bytes() const {
    return device_memory_bytes - runtime_reserve_bytes;
  }

  // Throws Error(kInvalidInput) on a violated field constraint.
  void Validate() const;

  bool operator==(const ClusterConfig&) const = default;
};

}  // namespace shardopt

#endif  // SHARDOPT_COST_MODEL_H_
