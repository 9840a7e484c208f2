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

// Independent reference implementations used by the unit and acceptance
// tests. None of them calls into the engine, the slowdown module or the
// timeline code; they only read the plain data types.
#ifndef DTSIM_TESTS_ORACLES_ORACLES_H_
#define DTSIM_TESTS_ORACLES_ORACLES_H_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dtsim/timeline.h"
#include "dtsim/workload.h"

namespace dtsim::oracle {

// ---------------------------------------------------------------------------
// Longest path over the explicit event graph.
//
// Nodes are ops; the ops of one collective launch (or one send/recv pair) are
// merged into a single node. Edges: intra-rank deps, lane order (consecutive
// ops of a lane by op_id), cross_deps (producer found by scanning exports).
// A node's start is the latest end among its predecessors; its end adds the
// node duration. Returns nullopt if the merged graph has a cycle.
inline std::optional<double> LongestPath(
    const WorkloadSet& ws, const std::function<double(RankId, const Operation&)>& comm_duration) {
  std::map<std::pair<RankId, OpId>, int> node_of;
  std::vector<double> weight;
  auto new_node = [&](double w) {
    weight.push_back(w);
    return static_cast<int>(weight.size()) - 1;
  };

  // Merge communication ops. Collectives: k-th op on a group for every member.
  std::map<std::pair<GroupId, int>, int> coll_node;
  std::map<std::pair<RankId, RankId>, std::vector<int>> send_nodes;  // channel -> nodes
  std::map<std::pair<RankId, RankId>, int> recv_seen;
  for (const auto& [rank, rw] : ws.ranks) {
    std::map<GroupId, int> seen;
    std::map<RankId, int> sends;
    for (const Operation& op : rw.ops) {
      if (const auto* c = std::get_if<CollectiveOp>(&op.kind)) {
        const auto key = std::make_pair(c->group_id, seen[c->group_id]++);
        auto it = coll_node.find(key);
        if (it == coll_node.end()) it = coll_node.emplace(key, new_node(comm_duration(rank, op))).first;
        node_of[{rank, op.op_id}] = it->second;
      } else if (const auto* p = std::get_if<P2POp>(&op.kind)) {
        if (p->direction == P2PDirection::kSend) {
          auto& list = send_nodes[{rank, p->peer_rank}];
          const int k = sends[p->peer_rank]++;
          while (static_cast<int>(list.size()) <= k) list.push_back(-1);
          if (list[k] < 0) list[k] = new_node(comm_duration(rank, op));
          node_of[{rank, op.op_id}] = list[k];
        }
      } else {
        node_of[{rank, op.op_id}] = new_node(op.duration_us.value_or(0.0));
      }
    }
  }
  for (const auto& [rank, rw] : ws.ranks) {
    for (const Operation& op : rw.ops) {
      const auto* p = std::get_if<P2POp>(&op.kind);
      if (p == nullptr || p->direction != P2PDirection::kRecv) continue;
      auto& list = send_nodes[{p->peer_rank, rank}];
      const int k = recv_seen[{p->peer_rank, rank}]++;
      while (static_cast<int>(list.size()) <= k) list.push_back(-1);
      if (list[k] < 0) list[k] = new_node(comm_duration(rank, op));
      node_of[{rank, op.op_id}] = list[k];
    }
  }

  std::map<std::string, int> producer;
  for (const auto& [rank, rw] : ws.ranks) {
    for (const Operation& op : rw.ops) {
      for (const std::string& key : op.exports) producer[key] = node_of.at({rank, op.op_id});
    }
  }

  const int n = static_cast<int>(weight.size());
  std::vector<std::vector<int>> preds(n);
  for (const auto& [rank, rw] : ws.ranks) {
    std::map<int, std::vector<const Operation*>> lanes;
    for (const Operation& op : rw.ops) {
      const int me = node_of.at({rank, op.op_id});
      for (OpId d : op.deps) preds[me].push_back(node_of.at({rank, d}));
      for (const CrossDep& cd : op.cross_deps) preds[me].push_back(producer.at(cd.match_key));
      lanes[static_cast<int>(op.lane())].push_back(&op);
    }
    for (auto& [lane, ops] : lanes) {
      std::sort(ops.begin(), ops.end(),
                [](const Operation* a, const Operation* b) { return a->op_id < b->op_id; });
      for (std::size_t i = 1; i < ops.size(); ++i) {
        preds[node_of.at({rank, ops[i]->op_id})].push_back(node_of.at({rank, ops[i - 1]->op_id}));
      }
    }
  }

  // Memoized DFS with an explicit colour array for cycle detection.
  std::vector<int> colour(n, 0);
  std::vector<double> finish(n, 0.0);
  bool cyclic = false;
  std::function<double(int)> end_of = [&](int v) -> double {
    if (colour[v] == 2) return finish[v];
    if (colour[v] == 1) {
      cyclic = true;
      return 0.0;
    }
    colour[v] = 1;
    double start = 0.0;
    for (int p : preds[v]) start = std::max(start, end_of(p));
    colour[v] = 2;
    finish[v] = start + weight[v];
    return finish[v];
  };
  double longest = 0.0;
  for (int v = 0; v < n; ++v) longest = std::max(longest, end_of(v));
  if (cyclic) return std::nullopt;
  return longest;
}

// ---------------------------------------------------------------------------
// Brute-force tick scheduler for pipeline schedules with blocking, batched
// point-to-point calls (rendezvous semantics, zero transfer time). Every
// stage runs its program step by step: compute steps take `duration` ticks;
// a communication call blocks until each of its transfers has been posted by
// the peer stage.

struct Transfer {
  bool send;
  bool forward;  // activation (true) or gradient (false)
  int mb;
};

struct Step {
  int compute_ticks = 0;           // > 0 for compute steps
  std::vector<Transfer> transfers;  // non-empty for communication calls
};

// Megatron-LM's non-interleaved 1F1B loop, written out call by call.
inline std::vector<Step> OneF1BProgram(int stages, int stage, int microbatches, int fwd_ticks,
                                       int bwd_ticks) {
  const bool first = stage == 0;
  const bool last = stage == stages - 1;
  const int warmup = std::min(stages - stage - 1, microbatches);
  const int remaining = microbatches - warmup;
  std::vector<Step> prog;
  auto call = [&](std::vector<Transfer> t) {
    std::erase_if(t, [&](const Transfer& x) {
      const bool to_next = x.forward == x.send;
      return to_next ? last : first;
    });
    if (!t.empty()) prog.push_back({0, std::move(t)});
  };
  auto forward = [&] { prog.push_back({fwd_ticks, {}}); };
  auto backward = [&] { prog.push_back({bwd_ticks, {}}); };

  int next_f = 0;
  int next_b = 0;
  for (int i = 0; i < warmup; ++i) {
    call({{false, true, next_f}});  // recv_forward
    forward();
    call({{true, true, next_f}});  // send_forward
    ++next_f;
  }
  if (remaining > 0) call({{false, true, next_f}});
  for (int i = 0; i < remaining; ++i) {
    forward();
    // send_forward_recv_backward
    call({{true, true, next_f}, {false, false, next_b}});
    ++next_f;
    backward();
    if (i == remaining - 1) {
      call({{true, false, next_b}});  // send_backward
    } else {
      // send_backward_recv_forward
      call({{true, false, next_b}, {false, true, next_f}});
    }
    ++next_b;
  }
  for (int i = 0; i < warmup; ++i) {
    call({{false, false, next_b}});  // recv_backward
    backward();
    call({{true, false, next_b}});  // send_backward
    ++next_b;
  }
  return prog;
}

inline std::vector<Step> GPipeProgram(int stages, int stage, int microbatches, int fwd_ticks,
                                      int bwd_ticks) {
  const bool first = stage == 0;
  const bool last = stage == stages - 1;
  std::vector<Step> prog;
  for (int m = 0; m < microbatches; ++m) {
    if (!first) prog.push_back({0, {{false, true, m}}});
    prog.push_back({fwd_ticks, {}});
    if (!last) prog.push_back({0, {{true, true, m}}});
  }
  for (int m = 0; m < microbatches; ++m) {
    if (!last) prog.push_back({0, {{false, false, m}}});
    prog.push_back({bwd_ticks, {}});
    if (!first) prog.push_back({0, {{true, false, m}}});
  }
  return prog;
}

// Returns the tick at which the last stage program finishes, or nullopt if
// the programs deadlock. `ticks[s]` is (forward, backward) duration of stage s.
inline std::optional<long> RunPipelineTicks(const std::vector<std::vector<Step>>& programs) {
  const int stages = static_cast<int>(programs.size());
  std::vector<std::size_t> pc(stages, 0);
  std::vector<long> busy_until(stages, 0);
  // A transfer is identified by (forward, mb, sender stage); posted[...] holds
  // which sides have posted it.
  std::map<std::tuple<bool, int, int>, int> posted;  // bit 1 = send, bit 2 = recv
  std::vector<bool> in_call(stages, false);
  auto transfer_key = [](int stage, const Transfer& t) {
    const int sender = t.send ? stage : (t.forward ? stage - 1 : stage + 1);
    return std::make_tuple(t.forward, t.mb, sender);
  };
  long now = 0;
  long finish = 0;
  while (true) {
    bool all_done = true;
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (int s = 0; s < stages; ++s) {
        if (pc[s] >= programs[s].size() || busy_until[s] > now) continue;
        const Step& step = programs[s][pc[s]];
        if (step.compute_ticks > 0) {
          busy_until[s] = now + step.compute_ticks;
          finish = std::max(finish, busy_until[s]);
          ++pc[s];
          progressed = true;
          continue;
        }
        if (!in_call[s]) {
          for (const Transfer& t : step.transfers) posted[transfer_key(s, t)] |= t.send ? 1 : 2;
          in_call[s] = true;
          progressed = true;
        }
        bool complete = true;
        for (const Transfer& t : step.transfers) complete &= posted[transfer_key(s, t)] == 3;
        if (complete) {
          in_call[s] = false;
          ++pc[s];
          progressed = true;
        }
      }
    }
    long next = -1;
    for (int s = 0; s < stages; ++s) {
      if (pc[s] < programs[s].size()) all_done = false;
      if (busy_until[s] > now && (next < 0 || busy_until[s] < next)) next = busy_until[s];
    }
    if (all_done) return std::max(finish, now);
    if (next < 0) return std::nullopt;  // blocked with nothing running
    now = next;
  }
}

// ---------------------------------------------------------------------------
// Tree ensemble evaluation straight from the model JSON. Inputs are a flat
// map of feature field -> number or category string.

inline double FeatureFromInput(const std::string& feature, const nlohmann::json& input) {
  const std::size_t eq = feature.find('=');
  if (eq != std::string::npos) {
    const nlohmann::json& v = input.at(feature.substr(0, eq));
    return v.get<std::string>() == feature.substr(eq + 1) ? 1.0 : 0.0;
  }
  return input.at(feature).get<double>();
}

inline double TraverseJson(const nlohmann::json& tree, const nlohmann::json& input) {
  const nlohmann::json* node = &tree.at("nodes").at(0);
  while (!node->contains("leaf")) {
    const double v = FeatureFromInput(node->at("feature").get<std::string>(), input);
    const int next = v < node->at("threshold").get<double>() ? node->at("left").get<int>()
                                                            : node->at("right").get<int>();
    node = &tree.at("nodes").at(next);
  }
  return node->at("leaf").get<double>();
}

inline double PredictJson(const nlohmann::json& model, const nlohmann::json& input) {
  double total = model.at("base_score").get<double>();
  for (const nlohmann::json& tree : model.at("trees")) total += TraverseJson(tree, input);
  return std::min(std::max(total, 1.0), model.at("clamp_max").get<double>());
}

// ---------------------------------------------------------------------------
// Quadratic overlap scan.

struct OverlapTriple {
  RankId rank;
  OpId compute_op;
  OpId comm_op;
  double overlap_us;
  friend bool operator==(const OverlapTriple&, const OverlapTriple&) = default;
  friend auto operator<=>(const OverlapTriple&, const OverlapTriple&) = default;
};

inline std::vector<OverlapTriple> QuadraticOverlaps(const std::vector<TimelineEvent>& events) {
  std::vector<OverlapTriple> out;
  for (const TimelineEvent& a : events) {
    if (a.lane != Lane::kCompute) continue;
    for (const TimelineEvent& b : events) {
      if (b.lane != Lane::kComm || b.rank != a.rank) continue;
      const double lo = std::max(a.start_us, b.start_us);
      const double hi = std::min(a.end_us, b.end_us);
      if (hi > lo) out.push_back({a.rank, a.op_id, b.op_id, hi - lo});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dtsim::oracle

#endif  // DTSIM_TESTS_ORACLES_ORACLES_H_
