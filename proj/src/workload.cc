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

#include <algorithm>
#include <queue>
#include <unordered_map>

#include <fmt/format.h>

#include "dtsim/error.h"
#include "dtsim/workload.h"

namespace dtsim {

namespace {

template <typename Enum, std::size_t N>
Enum ParseEnum(std::string_view s, const std::pair<std::string_view, Enum> (&table)[N],
               std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ParseError(fmt::format("unknown {} '{}'", what, s));
}

constexpr std::pair<std::string_view, CollectiveKind> kCollectiveNames[] = {
    {"AllReduce", CollectiveKind::kAllReduce},
    {"AllGather", CollectiveKind::kAllGather},
    {"ReduceScatter", CollectiveKind::kReduceScatter},
};
constexpr std::pair<std::string_view, AlgoKind> kAlgoNames[] = {
    {"Ring", AlgoKind::kRing},
    {"Tree", AlgoKind::kTree},
};
constexpr std::pair<std::string_view, P2PDirection> kP2PNames[] = {
    {"send", P2PDirection::kSend},
    {"recv", P2PDirection::kRecv},
};
constexpr std::pair<std::string_view, MemcpyDirection> kMemcpyNames[] = {
    {"h2d", MemcpyDirection::kH2D},
    {"d2h", MemcpyDirection::kD2H},
    {"d2d", MemcpyDirection::kD2D},
};
constexpr std::pair<std::string_view, CrossDepKind> kCrossDepNames[] = {
    {"activation_fwd", CrossDepKind::kActivationFwd},
    {"grad_bwd", CrossDepKind::kGradBwd},
    {"custom", CrossDepKind::kCustom},
};

template <typename Enum, std::size_t N>
std::string_view NameOf(Enum value, const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

std::string_view ToString(CollectiveKind kind) { return NameOf(kind, kCollectiveNames); }
std::string_view ToString(AlgoKind algo) { return NameOf(algo, kAlgoNames); }
std::string_view ToString(P2PDirection dir) { return NameOf(dir, kP2PNames); }
std::string_view ToString(MemcpyDirection dir) { return NameOf(dir, kMemcpyNames); }
std::string_view ToString(CrossDepKind kind) { return NameOf(kind, kCrossDepNames); }

std::string_view ToString(Lane lane) {
  switch (lane) {
    case Lane::kCompute:
      return "compute";
    case Lane::kComm:
      return "comm";
    case Lane::kMemcpy:
      return "memcpy";
  }
  return "?";
}

CollectiveKind ParseCollectiveKind(std::string_view s) {
  return ParseEnum(s, kCollectiveNames, "collective");
}
AlgoKind ParseAlgoKind(std::string_view s) { return ParseEnum(s, kAlgoNames, "algorithm"); }
P2PDirection ParseP2PDirection(std::string_view s) {
  return ParseEnum(s, kP2PNames, "p2p direction");
}
MemcpyDirection ParseMemcpyDirection(std::string_view s) {
  return ParseEnum(s, kMemcpyNames, "memcpy direction");
}
CrossDepKind ParseCrossDepKind(std::string_view s) {
  return ParseEnum(s, kCrossDepNames, "cross_dep kind");
}

bool IsSupported(CollectiveKind kind, AlgoKind algo) {
  return algo == AlgoKind::kRing || kind == CollectiveKind::kAllReduce;
}

Lane LaneOf(const OpKind& kind) {
  if (std::holds_alternative<ComputeOp>(kind)) return Lane::kCompute;
  if (std::holds_alternative<MemcpyOp>(kind)) return Lane::kMemcpy;
  return Lane::kComm;
}

std::string ToString(const Violation& v) {
  std::string out = fmt::format("{}", v.rule);
  if (v.rank >= 0) out += fmt::format(" (rank {}", v.rank);
  if (v.op_id >= 0) out += fmt::format("{}op {}", v.rank >= 0 ? ", " : " (", v.op_id);
  if (v.rank >= 0 || v.op_id >= 0) out += ")";
  if (!v.detail.empty()) out += ": " + v.detail;
  return out;
}

std::optional<std::vector<std::size_t>> TopologicalOrder(const RankWorkload& rw) {
  const std::size_t n = rw.ops.size();
  std::unordered_map<OpId, std::size_t> index;
  index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!index.emplace(rw.ops[i].op_id, i).second) return std::nullopt;
  }
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<int> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (OpId d : rw.ops[i].deps) {
      auto it = index.find(d);
      if (it == index.end()) return std::nullopt;
      succ[it->second].push_back(i);
      ++indegree[i];
    }
  }
  // Min-heap on op_id keeps the order stable across runs and platforms.
  auto later = [&](std::size_t a, std::size_t b) { return rw.ops[a].op_id > rw.ops[b].op_id; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t s : succ[i]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

CommMatching MatchCommunication(const WorkloadSet& ws) {
  CommMatching out;

  // Collectives: per group, per member rank, the sequence of collective ops in
  // op_id order. Ops are stored in op_id order by construction of a valid
  // trace; sort defensively so the matching is well defined regardless.
  std::map<GroupId, std::map<RankId, std::vector<std::size_t>>> per_group;
  // Sends keyed by (src, dst); recvs keyed by (src, dst) as well.
  std::map<std::pair<RankId, RankId>, std::vector<OpRef>> sends;
  std::map<std::pair<RankId, RankId>, std::vector<OpRef>> recvs;

  for (const auto& [rank, rw] : ws.ranks) {
    std::vector<std::size_t> order(rw.ops.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rw.ops[a].op_id < rw.ops[b].op_id;
    });
    for (std::size_t i : order) {
      const Operation& op = rw.ops[i];
      for (const std::string& key : op.exports) out.producers[key].push_back({rank, i});
      if (const auto* c = std::get_if<CollectiveOp>(&op.kind)) {
        per_group[c->group_id][rank].push_back(i);
      } else if (const auto* p = std::get_if<P2POp>(&op.kind)) {
        if (p->direction == P2PDirection::kSend) {
          sends[{rank, p->peer_rank}].push_back({rank, i});
        } else {
          recvs[{p->peer_rank, rank}].push_back({rank, i});
        }
      }
    }
  }

  for (const auto& [group, by_rank] : per_group) {
    auto git = ws.groups.find(group);
    if (git == ws.groups.end()) {
      for (const auto& [rank, idx] : by_rank) {
        out.violations.push_back({rank, ws.ranks.at(rank).ops[idx.front()].op_id, "unknown group",
                                  fmt::format("group '{}' is not declared", group)});
      }
      continue;
    }
    const std::vector<RankId>& members = git->second;
    bool consistent = true;
    for (const auto& [rank, idx] : by_rank) {
      if (std::find(members.begin(), members.end(), rank) == members.end()) {
        out.violations.push_back({rank, ws.ranks.at(rank).ops[idx.front()].op_id,
                                  "rank not in group",
                                  fmt::format("rank {} issues a collective on group '{}'", rank, group)});
        consistent = false;
      }
    }
    if (!consistent) continue;

    std::size_t count = 0;
    for (RankId m : members) {
      auto it = by_rank.find(m);
      const std::size_t c = it == by_rank.end() ? 0 : it->second.size();
      if (m == members.front()) {
        count = c;
      } else if (c != count) {
        consistent = false;
      }
    }
    if (!consistent) {
      std::string counts;
      for (RankId m : members) {
        auto it = by_rank.find(m);
        counts += fmt::format("{}rank {}: {}", counts.empty() ? "" : ", ", m,
                              it == by_rank.end() ? 0 : it->second.size());
      }
      out.violations.push_back({-1, -1, "group consistency",
                                fmt::format("group '{}' members issue different collective counts ({})",
                                            group, counts)});
      continue;
    }

    for (std::size_t k = 0; k < count; ++k) {
      CommInstance inst;
      const CollectiveOp* first = nullptr;
      for (RankId m : members) {
        const std::size_t idx = by_rank.at(m)[k];
        const Operation& op = ws.ranks.at(m).ops[idx];
        const auto& c = std::get<CollectiveOp>(op.kind);
        if (first == nullptr) {
          first = &c;
        } else if (c.collective != first->collective || c.algorithm != first->algorithm ||
                   c.tensor_bytes != first->tensor_bytes) {
          out.violations.push_back(
              {m, op.op_id, "group consistency",
               fmt::format("collective #{} on group '{}' is {}/{} {}B, expected {}/{} {}B", k, group,
                           ToString(c.collective), ToString(c.algorithm), c.tensor_bytes,
                           ToString(first->collective), ToString(first->algorithm),
                           first->tensor_bytes)});
          consistent = false;
        }
        inst.members.push_back({m, idx});
      }
      if (consistent) out.instances.push_back(std::move(inst));
    }
  }

  std::map<std::pair<RankId, RankId>, bool> channels;
  for (const auto& [ch, v] : sends) channels[ch] = true;
  for (const auto& [ch, v] : recvs) channels[ch] = true;
  for (const auto& [ch, unused] : channels) {
    static const std::vector<OpRef> kEmpty;
    auto sit = sends.find(ch);
    auto rit = recvs.find(ch);
    const auto& s = sit == sends.end() ? kEmpty : sit->second;
    const auto& r = rit == recvs.end() ? kEmpty : rit->second;
    const std::size_t paired = std::min(s.size(), r.size());
    for (std::size_t k = 0; k < paired; ++k) {
      const Operation& send_op = ws.ranks.at(s[k].rank).ops[s[k].index];
      const Operation& recv_op = ws.ranks.at(r[k].rank).ops[r[k].index];
      const auto sb = std::get<P2POp>(send_op.kind).tensor_bytes;
      const auto rb = std::get<P2POp>(recv_op.kind).tensor_bytes;
      if (sb != rb) {
        out.violations.push_back({r[k].rank, recv_op.op_id, "p2p size mismatch",
                                  fmt::format("recv of {}B paired with send of {}B from rank {}", rb,
                                              sb, ch.first)});
        continue;
      }
      CommInstance inst;
      inst.is_p2p = true;
      inst.members = {s[k], r[k]};
      std::sort(inst.members.begin(), inst.members.end());
      out.instances.push_back(std::move(inst));
    }
    for (std::size_t k = paired; k < s.size(); ++k) {
      out.violations.push_back({s[k].rank, ws.ranks.at(s[k].rank).ops[s[k].index].op_id,
                                "unpaired p2p",
                                fmt::format("send to rank {} has no matching recv", ch.second)});
    }
    for (std::size_t k = paired; k < r.size(); ++k) {
      out.violations.push_back({r[k].rank, ws.ranks.at(r[k].rank).ops[r[k].index].op_id,
                                "unpaired p2p",
                                fmt::format("recv from rank {} has no matching send", ch.first)});
    }
  }
  return out;
}

}  // namespace dtsim
