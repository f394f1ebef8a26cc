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

#include "shardopt/cost_model.h"

#include <cmath>
#include <string>

#include "shardopt/error.h"

namespace shardopt {
namespace {

constexpr double kMicrosPerSecond = 1e6;

[[noreturn]] void Invalid(const std::string& msg) {
  throw Error(ErrorCode::kInvalidInput, msg);
}

double Lerp(const CostPoint& a, const CostPoint& b, std::int64_t bytes) {
  const double t = static_cast<double>(bytes - a.bytes) /
                   static_cast<double>(b.bytes - a.bytes);
  return a.time_us + t * (b.time_us - a.time_us);
}

}  // namespace

CostModel::CostModel(double collective_latency_us, double collective_bandwidth,
                     double host_transfer_latency_us,
                     double host_transfer_bandwidth,
                     std::vector<CostPoint> collective_table)
    : collective_latency_us_(collective_latency_us),
      collective_bandwidth_(collective_bandwidth),
      host_latency_us_(host_transfer_latency_us),
      host_bandwidth_(host_transfer_bandwidth),
      table_(std::move(collective_table)) {
  if (!(collective_latency_us_ >= 0) || !(host_latency_us_ >= 0)) {
    Invalid("latencies must be >= 0");
  }
  if (!(collective_bandwidth_ > 0) || !(host_bandwidth_ > 0)) {
    Invalid("bandwidths must be > 0");
  }
  if (table_.size() == 1) Invalid("a cost table needs at least two points");
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (table_[i].bytes < 0 || !(table_[i].time_us >= 0)) {
      Invalid("cost table entries must be non-negative");
    }
    if (i > 0 && (table_[i].bytes <= table_[i - 1].bytes ||
                  table_[i].time_us < table_[i - 1].time_us)) {
      Invalid("cost table must be strictly increasing in size and "
              "nondecreasing in time");
    }
  }
}

double CostModel::comm_time(std::int64_t bytes) const {
  if (table_.empty()) {
    return collective_latency_us_ +
           static_cast<double>(bytes) * kMicrosPerSecond / collective_bandwidth_;
  }
  if (bytes <= table_.front().bytes) return table_.front().time_us;
  for (std::size_t i = 1; i < table_.size(); ++i) {
    if (bytes <= table_[i].bytes) return Lerp(table_[i - 1], table_[i], bytes);
  }
  return Lerp(table_[table_.size() - 2], table_.back(), bytes);
}

double CostModel::host_transfer_time(std::int64_t bytes) const {
  return host_latency_us_ +
         static_cast<double>(bytes) * kMicrosPerSecond / host_bandwidth_;
}

std::int64_t CostModel::comm_time_us(std::int64_t bytes) const {
  return std::llround(comm_time(bytes));
}

std::int64_t CostModel::host_transfer_time_us(std::int64_t bytes) const {
  return std::llround(host_transfer_time(bytes));
}

bool CostModel::should_fuse(std::int64_t v1, std::int64_t v2,
                            double alpha) const {
  return comm_time(v1) + comm_time(v2) > alpha * comm_time(v1 + v2);
}

std::int64_t allgather_buffer_size(const Parameter& param) {
  return param.size_bytes;
}

ClusterConfig ClusterConfig::WithDefaults(int device_count,
                                          std::int64_t device_memory_bytes) {
  ClusterConfig c;
  c.device_count = device_count;
  c.device_memory_bytes = device_memory_bytes;
  c.memory_limit_bytes = device_memory_bytes / 10 * 9;
  c.prefetch_limit_bytes = 2 * kGiB;
  return c;
}

void ClusterConfig::Validate() const {
  if (device_count < 1) Invalid("device_count must be >= 1");
  if (device_memory_bytes <= 0) Invalid("device_memory_bytes must be > 0");
  if (runtime_reserve_bytes < 0 || runtime_reserve_bytes >= device_memory_bytes) {
    Invalid("runtime_reserve_bytes must lie in [0, device_memory_bytes)");
  }
  if (memory_limit_bytes <= 0 || memory_limit_bytes > device_memory_bytes) {
    Invalid("memory_limit must satisfy 0 < M <= device_memory_bytes");
  }
  if (prefetch_limit_bytes <= 0) Invalid("prefetch_limit must be > 0");
  if (!(fusion_threshold >= 1.0)) Invalid("fusion_threshold must be >= 1");
  if (accumulation_steps < 1) Invalid("accumulation_steps must be >= 1");
  if (host_memory_bytes < 0) Invalid("host_memory_bytes must be >= 0");
}

}  // namespace shardopt
