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

#ifndef DTSIM_WORKLOAD_H_
#define DTSIM_WORKLOAD_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dtsim/kernel_metrics.h"

namespace dtsim {

using RankId = std::int32_t;
using OpId = std::int64_t;
using GroupId = std::string;

inline constexpr int kWorkloadSchemaVersion = 1;

enum class CollectiveKind { kAllReduce, kAllGather, kReduceScatter };
enum class AlgoKind { kRing, kTree };
enum class P2PDirection { kSend, kRecv };
enum class MemcpyDirection { kH2D, kD2H, kD2D };
enum class CrossDepKind { kActivationFwd, kGradBwd, kCustom };

// Serial executors of one rank. Values index per-rank lane arrays.
enum class Lane : int { kCompute = 0, kComm = 1, kMemcpy = 2 };
inline constexpr int kNumLanes = 3;

std::string_view ToString(CollectiveKind kind);
std::string_view ToString(AlgoKind algo);
std::string_view ToString(P2PDirection dir);
std::string_view ToString(MemcpyDirection dir);
std::string_view ToString(CrossDepKind kind);
std::string_view ToString(Lane lane);

// Parsers throw ParseError on unknown names.
CollectiveKind ParseCollectiveKind(std::string_view s);
AlgoKind ParseAlgoKind(std::string_view s);
P2PDirection ParseP2PDirection(std::string_view s);
MemcpyDirection ParseMemcpyDirection(std::string_view s);
CrossDepKind ParseCrossDepKind(std::string_view s);

// AllReduce admits Ring and Tree; the other collectives are ring-only.
bool IsSupported(CollectiveKind kind, AlgoKind algo);

struct ComputeOp {
  std::string kernel_name;
  std::string kernel_class;
  friend bool operator==(const ComputeOp&, const ComputeOp&) = default;
};

struct CollectiveOp {
  CollectiveKind collective = CollectiveKind::kAllReduce;
  AlgoKind algorithm = AlgoKind::kRing;
  GroupId group_id;
  std::int64_t tensor_bytes = 0;
  friend bool operator==(const CollectiveOp&, const CollectiveOp&) = default;
};

struct P2POp {
  P2PDirection direction = P2PDirection::kSend;
  RankId peer_rank = 0;
  std::int64_t tensor_bytes = 0;
  friend bool operator==(const P2POp&, const P2POp&) = default;
};

struct MemcpyOp {
  MemcpyDirection direction = MemcpyDirection::kD2D;
  std::int64_t bytes = 0;
  friend bool operator==(const MemcpyOp&, const MemcpyOp&) = default;
};

using OpKind = std::variant<ComputeOp, CollectiveOp, P2POp, MemcpyOp>;

Lane LaneOf(const OpKind& kind);

struct CrossDep {
  CrossDepKind kind = CrossDepKind::kCustom;
  std::string tag;  // only meaningful for kCustom
  RankId peer_rank = 0;
  std::string match_key;
  friend bool operator==(const CrossDep&, const CrossDep&) = default;
};

struct Operation {
  OpId op_id = 0;
  OpKind kind;
  // Microseconds. Present iff the op is Compute or Memcpy; communication ops
  // are placeholders whose time comes from the comm model.
  std::optional<double> duration_us;
  std::vector<OpId> deps;
  std::vector<CrossDep> cross_deps;
  // Match keys this op produces for CrossDeps on other ranks.
  std::vector<std::string> exports;
  std::optional<KernelMetrics> metrics;

  Lane lane() const { return LaneOf(kind); }
  friend bool operator==(const Operation&, const Operation&) = default;
};

struct RankWorkload {
  RankId rank = 0;
  GroupId dp_group;
  GroupId tp_group;
  GroupId pp_group;
  int pp_stage = 0;
  std::vector<Operation> ops;
  friend bool operator==(const RankWorkload&, const RankWorkload&) = default;
};

struct Parallelism {
  int pp = 1;
  int tp = 1;
  int dp = 1;
  int world_size() const { return pp * tp * dp; }
  friend bool operator==(const Parallelism&, const Parallelism&) = default;
};

struct WorkloadMeta {
  std::string framework;
  std::string model_name;
  Parallelism parallelism;
  int schema_version = kWorkloadSchemaVersion;
  friend bool operator==(const WorkloadMeta&, const WorkloadMeta&) = default;
};

// The full job: one execution graph per rank plus collective group
// membership. Immutable once loaded.
struct WorkloadSet {
  WorkloadMeta meta;
  std::map<GroupId, std::vector<RankId>> groups;
  std::map<RankId, RankWorkload> ranks;
  friend bool operator==(const WorkloadSet&, const WorkloadSet&) = default;
};

struct Violation {
  RankId rank = -1;  // -1 when the rule is not tied to one rank
  OpId op_id = -1;   // -1 when the rule is not tied to one op
  std::string rule;
  std::string detail;
};

std::string ToString(const Violation& v);

// Returns every violated invariant, in deterministic order (per-rank rules by
// ascending rank, then cross-rank rules). Empty iff the workload is valid.
std::vector<Violation> Validate(const WorkloadSet& ws);

// Deterministic topological order of one rank's ops (indices into `ops`),
// Kahn's algorithm with smallest op_id first. Returns nullopt on a cycle or a
// dependency that does not resolve.
std::optional<std::vector<std::size_t>> TopologicalOrder(const RankWorkload& rw);

// JSON trace I/O. Parse* checks structure and schema_version (ParseError);
// Load* additionally validates and throws ValidationError carrying the first
// violation.
WorkloadSet ParseWorkloadSet(std::string_view json_text);
WorkloadSet LoadWorkloadSetUnchecked(const std::filesystem::path& path);
WorkloadSet LoadWorkloadSet(const std::filesystem::path& path);

// Canonical serialization: objects with sorted keys, integers for byte sizes,
// ranks and groups in ascending order.
std::string SerializeWorkloadSet(const WorkloadSet& ws, int indent = -1);
void SaveWorkloadSet(const WorkloadSet& ws, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Communication matching shared by validation and the engine.

struct OpRef {
  RankId rank = 0;
  std::size_t index = 0;  // position in RankWorkload::ops
  friend bool operator==(const OpRef&, const OpRef&) = default;
  friend auto operator<=>(const OpRef&, const OpRef&) = default;
};

// One launch of a collective on a group, or one send/recv pair. Members are
// ordered by rank.
struct CommInstance {
  std::vector<OpRef> members;
  bool is_p2p = false;
};

struct CommMatching {
  std::vector<CommInstance> instances;
  // match_key -> producing ops (more than one is a violation).
  std::map<std::string, std::vector<OpRef>> producers;
  std::vector<Violation> violations;
};

// Pairs the k-th collective on a group across all members and the k-th
// send/recv on each directed channel. Inconsistencies are reported as
// violations rather than thrown.
CommMatching MatchCommunication(const WorkloadSet& ws);

}  // namespace dtsim

#endif  // DTSIM_WORKLOAD_H_
