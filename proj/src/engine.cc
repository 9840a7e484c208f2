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

#include "dtsim/engine.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

#include <fmt/format.h>

#include "dtsim/error.h"

namespace dtsim {

ParamKey CollectiveKey(const CollectiveOp& op, const std::vector<RankId>& members,
                       const Topology& topo) {
  std::map<int, int> per_node;
  for (RankId r : members) ++per_node[r / topo.gpus_per_node];
  const int n = static_cast<int>(members.size());
  const int m = static_cast<int>(per_node.size());
  for (const auto& [node, count] : per_node) {
    if (count * m != n) {
      throw ParamLookupError(fmt::format(
          "group '{}' spreads {} ranks unevenly over {} nodes", op.group_id, n, m));
    }
  }
  ParamKey key;
  key.collective = ToCommKind(op.collective);
  key.algorithm = op.algorithm;
  key.interconnect = m == 1 ? Interconnect::kNVLink : Interconnect::kIB;
  key.n_devices = n;
  key.n_nodes = m;
  key.tensor_bytes = op.tensor_bytes;
  return key;
}

ParamKey P2PKey(RankId a, RankId b, std::int64_t tensor_bytes, const Topology& topo) {
  const bool same_node = a / topo.gpus_per_node == b / topo.gpus_per_node;
  ParamKey key;
  key.collective = CommKind::kP2P;
  key.algorithm = AlgoKind::kRing;
  key.interconnect = same_node ? Interconnect::kNVLink : Interconnect::kIB;
  key.n_devices = 2;
  key.n_nodes = same_node ? 1 : 2;
  key.tensor_bytes = tensor_bytes;
  return key;
}

namespace {

// Memoizes comm estimates; synthesized programs repeat a handful of shapes.
class CommCostCache {
 public:
  CommCostCache(const WorkloadSet& ws, const CommParamDB& db, const Topology& topo)
      : ws_(ws), db_(db), topo_(topo) {}

  double Duration(RankId rank, const Operation& op) {
    if (const auto* c = std::get_if<CollectiveOp>(&op.kind)) {
      auto git = ws_.groups.find(c->group_id);
      if (git == ws_.groups.end()) {
        throw ValidationError(fmt::format("rank {} op {}: unknown group '{}'", rank, op.op_id,
                                          c->group_id));
      }
      if (git->second.size() <= 1) return 0.0;
      const ParamKey key = CollectiveKey(*c, git->second, topo_);
      return Cached(key, [&] {
        return EstimateCollective(c->collective, c->algorithm, c->tensor_bytes, key.n_devices,
                                  key.n_nodes, db_.Lookup(key));
      });
    }
    if (const auto* p = std::get_if<P2POp>(&op.kind)) {
      const ParamKey key = P2PKey(rank, p->peer_rank, p->tensor_bytes, topo_);
      return Cached(key, [&] {
        return EstimateP2P(p->tensor_bytes, key.n_nodes == 1, db_.Lookup(key));
      });
    }
    throw InvalidArgument(fmt::format("rank {} op {} is not a communication op", rank, op.op_id));
  }

 private:
  template <typename Fn>
  double Cached(const ParamKey& key, Fn&& fn) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double d = fn();
    cache_.emplace(key, d);
    return d;
  }

  const WorkloadSet& ws_;
  const CommParamDB& db_;
  const Topology& topo_;
  std::map<ParamKey, double> cache_;
};

std::string Describe(const WorkloadSet& ws, RankId rank, std::size_t index) {
  const Operation& op = ws.ranks.at(rank).ops[index];
  struct Visitor {
    std::string operator()(const ComputeOp& c) const { return c.kernel_name; }
    std::string operator()(const CollectiveOp& c) const {
      return fmt::format("{} on {}", ToString(c.collective), c.group_id);
    }
    std::string operator()(const P2POp& p) const {
      return fmt::format("{} {} {}", ToString(p.direction),
                         p.direction == P2PDirection::kSend ? "to" : "from", p.peer_rank);
    }
    std::string operator()(const MemcpyOp& m) const {
      return fmt::format("memcpy {}", ToString(m.direction));
    }
  };
  return fmt::format("rank {} op {} ({})", rank, op.op_id, std::visit(Visitor{}, op.kind));
}

}  // namespace

double CommDurationUs(const WorkloadSet& ws, const CommParamDB& db, const Topology& topo,
                      RankId rank, const Operation& op) {
  CommCostCache cache(ws, db, topo);
  return cache.Duration(rank, op);
}

Timeline Compose(const WorkloadSet& ws, const CommParamDB& db, const Topology& topo,
                 const OpFactors* factors) {
  if (topo.gpus_per_node < 1) throw InvalidArgument("gpus_per_node must be >= 1");
  CommMatching matching = MatchCommunication(ws);
  if (!matching.violations.empty()) {
    throw ValidationError(ToString(matching.violations.front()));
  }

  // Flatten every op into one index space.
  std::map<RankId, std::size_t> offset;
  std::vector<OpRef> refs;
  for (const auto& [rank, rw] : ws.ranks) {
    offset[rank] = refs.size();
    for (std::size_t i = 0; i < rw.ops.size(); ++i) refs.push_back({rank, i});
  }
  const std::size_t n = refs.size();
  auto global = [&](const OpRef& r) { return offset.at(r.rank) + r.index; };

  std::vector<double> duration(n, 0.0);
  std::vector<double> ready(n, 0.0);
  std::vector<int> pending(n, 0);
  std::vector<int> instance_of(n, -1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (from, to)

  for (const auto& [rank, rw] : ws.ranks) {
    const std::size_t base = offset[rank];
    std::map<OpId, std::size_t> index_of;
    for (std::size_t i = 0; i < rw.ops.size(); ++i) index_of.emplace(rw.ops[i].op_id, i);

    std::vector<std::size_t> lanes[kNumLanes];
    for (std::size_t i = 0; i < rw.ops.size(); ++i) {
      const Operation& op = rw.ops[i];
      lanes[static_cast<int>(op.lane())].push_back(i);
      if (op.lane() != Lane::kComm) {
        if (!op.duration_us || *op.duration_us < 0.0 || !std::isfinite(*op.duration_us)) {
          throw ValidationError(
              fmt::format("rank {} op {}: missing or invalid duration", rank, op.op_id));
        }
        double d = *op.duration_us;
        if (factors != nullptr && op.lane() == Lane::kCompute) {
          if (auto fit = factors->find(rank); fit != factors->end() && i < fit->second.size()) {
            d *= fit->second[i];
          }
        }
        duration[base + i] = d;
      }
      for (OpId dep : op.deps) {
        auto it = index_of.find(dep);
        if (it == index_of.end()) {
          throw ValidationError(
              fmt::format("rank {} op {}: dangling dep {}", rank, op.op_id, dep));
        }
        edges.emplace_back(base + it->second, base + i);
      }
      for (const CrossDep& cd : op.cross_deps) {
        auto it = matching.producers.find(cd.match_key);
        if (it == matching.producers.end() || it->second.size() != 1) {
          throw ValidationError(fmt::format("rank {} op {}: cross_dep '{}' has no unique producer",
                                            rank, op.op_id, cd.match_key));
        }
        edges.emplace_back(global(it->second.front()), base + i);
      }
    }
    for (auto& lane : lanes) {
      std::sort(lane.begin(), lane.end(),
                [&](std::size_t a, std::size_t b) { return rw.ops[a].op_id < rw.ops[b].op_id; });
      for (std::size_t k = 1; k < lane.size(); ++k) {
        edges.emplace_back(base + lane[k - 1], base + lane[k]);
      }
    }
  }

  CommCostCache costs(ws, db, topo);
  std::vector<std::vector<std::size_t>> members(matching.instances.size());
  for (std::size_t k = 0; k < matching.instances.size(); ++k) {
    const CommInstance& inst = matching.instances[k];
    for (const OpRef& r : inst.members) {
      members[k].push_back(global(r));
      instance_of[global(r)] = static_cast<int>(k);
    }
    // Every member is charged the same kernel time; the first member's view
    // decides (for P2P both sides resolve to the same key).
    const OpRef& first = inst.members.front();
    const double d = costs.Duration(first.rank, ws.ranks.at(first.rank).ops[first.index]);
    for (std::size_t g : members[k]) duration[g] = d;
  }
  for (std::size_t g = 0; g < n; ++g) {
    if (instance_of[g] < 0 && ws.ranks.at(refs[g].rank).ops[refs[g].index].lane() == Lane::kComm) {
      throw ValidationError(
          fmt::format("{} has no matching peer", Describe(ws, refs[g].rank, refs[g].index)));
    }
  }

  // Successor lists in CSR form.
  std::vector<std::size_t> succ_begin(n + 1, 0);
  for (const auto& [from, to] : edges) {
    ++succ_begin[from + 1];
    ++pending[to];
  }
  for (std::size_t g = 0; g < n; ++g) succ_begin[g + 1] += succ_begin[g];
  std::vector<std::size_t> succ(edges.size());
  {
    std::vector<std::size_t> fill(succ_begin.begin(), succ_begin.end() - 1);
    for (const auto& [from, to] : edges) succ[fill[from]++] = to;
  }

  // Completion queue ordered by (time, rank, op_id).
  using Completion = std::tuple<double, RankId, OpId, std::size_t>;
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> queue;
  std::vector<double> start(n, 0.0);
  std::vector<double> end(n, 0.0);
  std::vector<char> done(n, 0);
  std::vector<int> arrived(members.size(), 0);

  auto op_id_of = [&](std::size_t g) {
    return ws.ranks.at(refs[g].rank).ops[refs[g].index].op_id;
  };
  auto launch = [&](std::size_t g, double t) {
    start[g] = t;
    end[g] = t + duration[g];
    queue.emplace(end[g], refs[g].rank, op_id_of(g), g);
  };
  std::vector<double> arrivals;
  auto arrive = [&](std::size_t g) {
    const int k = instance_of[g];
    if (k < 0) {
      launch(g, ready[g]);
      return;
    }
    if (++arrived[k] < static_cast<int>(members[k].size())) return;
    arrivals.clear();
    for (std::size_t m : members[k]) arrivals.push_back(ready[m]);
    const CommInstance& inst = matching.instances[k];
    const double t = SyncStart(arrivals, inst.is_p2p ? CommKind::kP2P : CommKind::kAllReduce);
    for (std::size_t m : members[k]) launch(m, t);
  };

  for (std::size_t g = 0; g < n; ++g) {
    if (pending[g] == 0) arrive(g);
  }
  std::size_t finished = 0;
  while (!queue.empty()) {
    const auto [t, rank, op_id, g] = queue.top();
    queue.pop();
    done[g] = 1;
    ++finished;
    for (std::size_t e = succ_begin[g]; e < succ_begin[g + 1]; ++e) {
      const std::size_t s = succ[e];
      ready[s] = std::max(ready[s], t);
      if (--pending[s] == 0) arrive(s);
    }
  }

  if (finished < n) {
    // Each stuck op waits on a stuck predecessor, or (having arrived at a
    // rendezvous) on a stuck peer that has not; following those links from
    // any stuck op must revisit one.
    std::vector<std::vector<std::size_t>> preds(n);
    for (const auto& [from, to] : edges) {
      if (!done[to] && !done[from]) preds[to].push_back(from);
    }
    auto waits_on = [&](std::size_t g) -> std::size_t {
      if (pending[g] > 0) {
        for (std::size_t p : preds[g]) {
          if (!done[p]) return p;
        }
      }
      if (instance_of[g] >= 0) {
        for (std::size_t m : members[static_cast<std::size_t>(instance_of[g])]) {
          if (pending[m] > 0) return m;
        }
      }
      return g;
    };
    std::size_t cur = 0;
    while (done[cur]) ++cur;
    std::map<std::size_t, std::size_t> seen;
    std::vector<std::size_t> path;
    while (!seen.count(cur)) {
      seen[cur] = path.size();
      path.push_back(cur);
      cur = waits_on(cur);
    }
    std::string cycle;
    for (std::size_t i = seen[cur]; i < path.size(); ++i) {
      cycle += Describe(ws, refs[path[i]].rank, refs[path[i]].index) + " -> ";
    }
    cycle += Describe(ws, refs[cur].rank, refs[cur].index);
    throw DeadlockError(
        fmt::format("{} ops cannot start; wait cycle: {}", n - finished, cycle));
  }

  Timeline tl;
  tl.events.reserve(n);
  for (std::size_t g = 0; g < n; ++g) {
    const Operation& op = ws.ranks.at(refs[g].rank).ops[refs[g].index];
    tl.events.push_back({refs[g].rank, op.lane(), op.op_id, refs[g].index, start[g], end[g]});
  }
  SortEvents(tl.events);
  return tl;
}

SimResult Simulate(const WorkloadSet& ws, const CommParamDB& db, const SlowdownModel& model,
                   const SimOptions& opts) {
  SimResult result;
  result.timeline = Compose(ws, db, opts.topology);
  for (const auto& [rank, rw] : ws.ranks) result.factors[rank].assign(rw.ops.size(), 1.0);

  double change = 0.0;
  for (int pass = 1; pass <= opts.slowdown_passes_max; ++pass) {
    SlowdownAdjustment adj = ApplySlowdown(result.timeline, ws, model, opts.knobs);
    Timeline next = Compose(ws, db, opts.topology, &adj.factors);
    change = std::abs(next.step_time_us() - result.timeline.step_time_us());
    result.timeline = std::move(next);
    result.factors = std::move(adj.factors);
    result.adjusted_ops = adj.adjusted_ops;
    result.iterations_of_slowdown_pass = pass;
    result.converged = change < opts.convergence_tol_us;
    if (result.converged) break;
  }
  if (!result.converged) {
    result.warnings.push_back(
        fmt::format("NonConvergenceWarning: step time still moved {} us after {} slowdown passes",
                    change, result.iterations_of_slowdown_pass));
  }
  result.step_time_us = result.timeline.step_time_us();
  result.per_rank = ComputeRankStats(result.timeline, ws);
  return result;
}

}  // namespace dtsim
