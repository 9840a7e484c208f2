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

#ifndef DTSIM_ENGINE_H_
#define DTSIM_ENGINE_H_

#include <map>
#include <string>
#include <vector>

#include "dtsim/comm_model.h"
#include "dtsim/slowdown.h"
#include "dtsim/timeline.h"
#include "dtsim/workload.h"

namespace dtsim {

struct Topology {
  int gpus_per_node = 8;
};

// Parameter key of a collective over `members`. N is the group size, M the
// number of distinct nodes (rank / gpus_per_node); NVLink when M == 1, IB
// otherwise. Throws ParamLookupError when members are spread unevenly over
// nodes (N not divisible by M, or unequal per-node counts).
ParamKey CollectiveKey(const CollectiveOp& op, const std::vector<RankId>& members,
                       const Topology& topo);

// P2P transfers use the two-device family: NVLink/1 node or IB/2 nodes.
ParamKey P2PKey(RankId a, RankId b, std::int64_t tensor_bytes, const Topology& topo);

// Estimated duration of a communication op on `rank`. A collective over a
// single rank costs nothing.
double CommDurationUs(const WorkloadSet& ws, const CommParamDB& db, const Topology& topo,
                      RankId rank, const Operation& op);

// Replays every rank program onto its lanes. Lanes run their ops strictly in
// op_id order; an op starts once its lane is free and all deps and cross_deps
// have ended. Collectives and send/recv pairs start at the last member
// arrival and occupy every member's comm lane for the same interval.
// `factors` (may be null) scales compute durations.
//
// Throws ValidationError for inconsistent communication, DeadlockError (with
// the wait cycle) when programs cannot make progress, and the comm-model
// lookup errors.
Timeline Compose(const WorkloadSet& ws, const CommParamDB& db, const Topology& topo,
                 const OpFactors* factors = nullptr);

struct SimOptions {
  Topology topology;
  CommKnobs knobs;
  int slowdown_passes_max = 3;
  double convergence_tol_us = 1.0;
};

struct SimResult {
  double step_time_us = 0.0;
  std::map<RankId, RankStats> per_rank;
  Timeline timeline;
  OpFactors factors;
  int iterations_of_slowdown_pass = 0;
  bool converged = true;
  std::size_t adjusted_ops = 0;
  std::vector<std::string> warnings;
};

// compose -> detect overlaps -> apply slowdown -> recompose, until the step
// time moves by less than the tolerance or the pass cap is reached (recorded
// as a warning). Factors are always applied to base durations.
SimResult Simulate(const WorkloadSet& ws, const CommParamDB& db, const SlowdownModel& model,
                   const SimOptions& opts);

}  // namespace dtsim

#endif  // DTSIM_ENGINE_H_
