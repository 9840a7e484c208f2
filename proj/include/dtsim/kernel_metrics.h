/*
 * Copyright 2026 The dtsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DTSIM_KERNEL_METRICS_H_
#define DTSIM_KERNEL_METRICS_H_

#include <string>

namespace dtsim {

// Isolated (non-overlapped) profile of one compute kernel, as collected on a
// single device. Percentages are in [0, 100].
struct KernelMetrics {
  double running_time_us = 0.0;
  double compute_throughput_pct = 0.0;
  double memory_throughput_pct = 0.0;
  double dram_throughput_pct = 0.0;
  double achieved_occupancy_pct = 0.0;
  double l1_hit_rate_pct = 0.0;
  double l2_hit_rate_pct = 0.0;
  std::string kernel_class;

  friend bool operator==(const KernelMetrics&, const KernelMetrics&) = default;
};

}  // namespace dtsim

#endif  // DTSIM_KERNEL_METRICS_H_
