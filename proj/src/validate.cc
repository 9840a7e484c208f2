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

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "dtsim/workload.h"

namespace dtsim {

namespace {

bool ValidPct(double v) { return std::isfinite(v) && v >= 0.0 && v <= 100.0; }

void ValidateRank(const WorkloadSet& ws, const RankWorkload& rw, std::vector<Violation>& out) {
  const RankId rank = rw.rank;
  std::unordered_map<OpId, std::size_t> position;
  position.reserve(rw.ops.size());

  OpId previous = 0;
  for (std::size_t i = 0; i < rw.ops.size(); ++i) {
    const Operation& op = rw.ops[i];
    if (!position.emplace(op.op_id, i).second) {
      out.push_back({rank, op.op_id, "duplicate op_id", ""});
    } else if (i > 0 && op.op_id <= previous) {
      out.push_back({rank, op.op_id, "op_id order",
                     fmt::format("op_id {} listed after op_id {}", op.op_id, previous)});
    }
    previous = op.op_id;
  }

  bool graph_ok = true;
  for (std::size_t i = 0; i < rw.ops.size(); ++i) {
    const Operation& op = rw.ops[i];
    for (OpId d : op.deps) {
      if (d == op.op_id) {
        out.push_back({rank, op.op_id, "self-dependency", ""});
        graph_ok = false;
      } else if (!position.contains(d)) {
        out.push_back({rank, op.op_id, "dangling dep", fmt::format("op {} does not exist", d)});
        graph_ok = false;
      }
    }
  }
  if (graph_ok) {
    if (!TopologicalOrder(rw)) {
      out.push_back({rank, -1, "cycle", "dependency relation is not acyclic"});
    } else {
      for (std::size_t i = 0; i < rw.ops.size(); ++i) {
        for (OpId d : rw.ops[i].deps) {
          if (position.at(d) > i) {
            out.push_back({rank, rw.ops[i].op_id, "topological order",
                           fmt::format("dependency {} is listed later", d)});
          }
        }
      }
    }
  }

  for (const Operation& op : rw.ops) {
    const bool timed = std::holds_alternative<ComputeOp>(op.kind) ||
                       std::holds_alternative<MemcpyOp>(op.kind);
    if (timed && !op.duration_us) {
      out.push_back({rank, op.op_id, "missing duration", ""});
    } else if (!timed && op.duration_us) {
      out.push_back({rank, op.op_id, "unexpected duration",
                     "communication ops are placeholders without a duration"});
    } else if (op.duration_us && !(std::isfinite(*op.duration_us) && *op.duration_us >= 0.0)) {
      out.push_back({rank, op.op_id, "negative duration", fmt::format("{}", *op.duration_us)});
    }

    if (const auto* c = std::get_if<CollectiveOp>(&op.kind)) {
      if (c->tensor_bytes <= 0) {
        out.push_back({rank, op.op_id, "non-positive tensor_bytes", ""});
      }
      if (!IsSupported(c->collective, c->algorithm)) {
        out.push_back({rank, op.op_id, "unsupported algorithm",
                       fmt::format("{} does not support {}", ToString(c->collective),
                                   ToString(c->algorithm))});
      }
    } else if (const auto* p = std::get_if<P2POp>(&op.kind)) {
      if (p->tensor_bytes <= 0) {
        out.push_back({rank, op.op_id, "non-positive tensor_bytes", ""});
      }
      if (p->peer_rank == rank || !ws.ranks.contains(p->peer_rank)) {
        out.push_back({rank, op.op_id, "invalid peer", fmt::format("peer rank {}", p->peer_rank)});
      }
    } else if (const auto* m = std::get_if<MemcpyOp>(&op.kind)) {
      if (m->bytes < 0) out.push_back({rank, op.op_id, "negative bytes", ""});
    }

    if (op.metrics) {
      const KernelMetrics& km = *op.metrics;
      const bool ok = std::isfinite(km.running_time_us) && km.running_time_us > 0.0 &&
                      ValidPct(km.compute_throughput_pct) && ValidPct(km.memory_throughput_pct) &&
                      ValidPct(km.dram_throughput_pct) && ValidPct(km.achieved_occupancy_pct) &&
                      ValidPct(km.l1_hit_rate_pct) && ValidPct(km.l2_hit_rate_pct);
      if (!ok) out.push_back({rank, op.op_id, "metrics range", ""});
    }
  }
}

}  // namespace

std::vector<Violation> Validate(const WorkloadSet& ws) {
  std::vector<Violation> out;

  for (const auto& [rank, rw] : ws.ranks) {
    if (rw.rank != rank) {
      out.push_back({rank, -1, "rank id mismatch", fmt::format("entry declares rank {}", rw.rank)});
    }
    ValidateRank(ws, rw, out);
  }

  const int expected = ws.meta.parallelism.world_size();
  if (static_cast<std::size_t>(expected) != ws.ranks.size()) {
    out.push_back({-1, -1, "rank count",
                   fmt::format("pp*tp*dp = {} but {} ranks present", expected, ws.ranks.size())});
  }

  for (const auto& [group, members] : ws.groups) {
    std::unordered_set<RankId> seen;
    for (RankId m : members) {
      if (!ws.ranks.contains(m)) {
        out.push_back({-1, -1, "unknown rank in group",
                       fmt::format("group '{}' lists rank {}", group, m)});
      } else if (!seen.insert(m).second) {
        out.push_back({-1, -1, "duplicate group member",
                       fmt::format("group '{}' lists rank {} twice", group, m)});
      }
    }
  }

  CommMatching matching = MatchCommunication(ws);
  out.insert(out.end(), matching.violations.begin(), matching.violations.end());

  for (const auto& [rank, rw] : ws.ranks) {
    for (const Operation& op : rw.ops) {
      for (const CrossDep& cd : op.cross_deps) {
        auto it = matching.producers.find(cd.match_key);
        if (it == matching.producers.end()) {
          out.push_back({rank, op.op_id, "unmatched cross_dep",
                         fmt::format("no producer exports '{}'", cd.match_key)});
        } else if (it->second.size() > 1) {
          out.push_back({rank, op.op_id, "ambiguous cross_dep",
                         fmt::format("{} producers export '{}'", it->second.size(), cd.match_key)});
        } else if (it->second.front().rank != cd.peer_rank) {
          out.push_back({rank, op.op_id, "cross_dep peer mismatch",
                         fmt::format("'{}' is exported by rank {}, not {}", cd.match_key,
                                     it->second.front().rank, cd.peer_rank)});
        }
      }
    }
  }
  return out;
}

}  // namespace dtsim
