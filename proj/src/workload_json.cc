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

#include <fstream>
#include <sstream>

#include "dtsim/error.h"
#include "dtsim/workload.h"
#include "json_util.h"

namespace dtsim {

namespace internal {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace internal

namespace {

using internal::AsBytes;
using internal::AsInt;
using internal::AsNumber;
using internal::AsString;
using internal::Field;
using internal::Json;

KernelMetrics ParseMetrics(const Json& j, const std::string& where) {
  KernelMetrics m;
  m.running_time_us = AsNumber(Field(j, "running_time_us", where), where);
  m.compute_throughput_pct = AsNumber(Field(j, "compute_throughput_pct", where), where);
  m.memory_throughput_pct = AsNumber(Field(j, "memory_throughput_pct", where), where);
  m.dram_throughput_pct = AsNumber(Field(j, "dram_throughput_pct", where), where);
  m.achieved_occupancy_pct = AsNumber(Field(j, "achieved_occupancy_pct", where), where);
  m.l1_hit_rate_pct = AsNumber(Field(j, "l1_hit_rate_pct", where), where);
  m.l2_hit_rate_pct = AsNumber(Field(j, "l2_hit_rate_pct", where), where);
  m.kernel_class = AsString(Field(j, "kernel_class", where), where);
  return m;
}

Json MetricsToJson(const KernelMetrics& m) {
  return Json{{"running_time_us", m.running_time_us},
              {"compute_throughput_pct", m.compute_throughput_pct},
              {"memory_throughput_pct", m.memory_throughput_pct},
              {"dram_throughput_pct", m.dram_throughput_pct},
              {"achieved_occupancy_pct", m.achieved_occupancy_pct},
              {"l1_hit_rate_pct", m.l1_hit_rate_pct},
              {"l2_hit_rate_pct", m.l2_hit_rate_pct},
              {"kernel_class", m.kernel_class}};
}

OpKind ParseKind(const Json& j, const std::string& where) {
  const std::string type = AsString(Field(j, "type", where), where + ".type");
  if (type == "compute") {
    return ComputeOp{AsString(Field(j, "kernel_name", where), where),
                     AsString(Field(j, "kernel_class", where), where)};
  }
  if (type == "collective") {
    CollectiveOp c;
    c.collective = ParseCollectiveKind(AsString(Field(j, "collective", where), where));
    c.algorithm = ParseAlgoKind(AsString(Field(j, "algorithm", where), where));
    c.group_id = AsString(Field(j, "group_id", where), where);
    c.tensor_bytes = AsBytes(Field(j, "tensor_bytes", where), where + ".tensor_bytes");
    return c;
  }
  if (type == "p2p") {
    P2POp p;
    p.direction = ParseP2PDirection(AsString(Field(j, "direction", where), where));
    p.peer_rank = static_cast<RankId>(AsInt(Field(j, "peer_rank", where), where));
    p.tensor_bytes = AsBytes(Field(j, "tensor_bytes", where), where + ".tensor_bytes");
    return p;
  }
  if (type == "memcpy") {
    MemcpyOp m;
    m.direction = ParseMemcpyDirection(AsString(Field(j, "direction", where), where));
    m.bytes = AsBytes(Field(j, "bytes", where), where + ".bytes");
    return m;
  }
  throw ParseError(fmt::format("{}: unknown op type '{}'", where, type));
}

Json KindToJson(const OpKind& kind) {
  return std::visit(
      [](const auto& k) -> Json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ComputeOp>) {
          return {{"type", "compute"}, {"kernel_name", k.kernel_name}, {"kernel_class", k.kernel_class}};
        } else if constexpr (std::is_same_v<T, CollectiveOp>) {
          return {{"type", "collective"},
                  {"collective", ToString(k.collective)},
                  {"algorithm", ToString(k.algorithm)},
                  {"group_id", k.group_id},
                  {"tensor_bytes", k.tensor_bytes}};
        } else if constexpr (std::is_same_v<T, P2POp>) {
          return {{"type", "p2p"},
                  {"direction", ToString(k.direction)},
                  {"peer_rank", k.peer_rank},
                  {"tensor_bytes", k.tensor_bytes}};
        } else {
          return {{"type", "memcpy"}, {"direction", ToString(k.direction)}, {"bytes", k.bytes}};
        }
      },
      kind);
}

Operation ParseOp(const Json& j, const std::string& where) {
  Operation op;
  op.op_id = AsInt(Field(j, "op_id", where), where + ".op_id");
  const std::string here = fmt::format("{} (op {})", where, op.op_id);
  op.kind = ParseKind(Field(j, "kind", here), here + ".kind");
  if (auto it = j.find("duration_us"); it != j.end() && !it->is_null()) {
    op.duration_us = AsNumber(*it, here + ".duration_us");
  }
  const Json& deps = Field(j, "deps", here);
  if (!deps.is_array()) throw ParseError(here + ".deps: expected an array");
  for (const Json& d : deps) op.deps.push_back(AsInt(d, here + ".deps"));
  if (auto it = j.find("cross_deps"); it != j.end()) {
    if (!it->is_array()) throw ParseError(here + ".cross_deps: expected an array");
    for (const Json& cj : *it) {
      CrossDep cd;
      cd.kind = ParseCrossDepKind(AsString(Field(cj, "kind", here), here + ".cross_deps.kind"));
      if (auto t = cj.find("tag"); t != cj.end()) cd.tag = AsString(*t, here + ".cross_deps.tag");
      cd.peer_rank = static_cast<RankId>(AsInt(Field(cj, "peer_rank", here), here));
      cd.match_key = AsString(Field(cj, "match_key", here), here);
      op.cross_deps.push_back(std::move(cd));
    }
  }
  if (auto it = j.find("exports"); it != j.end()) {
    if (!it->is_array()) throw ParseError(here + ".exports: expected an array");
    for (const Json& e : *it) op.exports.push_back(AsString(e, here + ".exports"));
  }
  if (auto it = j.find("metrics"); it != j.end() && !it->is_null()) {
    op.metrics = ParseMetrics(*it, here + ".metrics");
  }
  return op;
}

Json OpToJson(const Operation& op) {
  Json j;
  j["op_id"] = op.op_id;
  j["kind"] = KindToJson(op.kind);
  if (op.duration_us) j["duration_us"] = *op.duration_us;
  j["deps"] = op.deps;
  if (!op.cross_deps.empty()) {
    Json arr = Json::array();
    for (const CrossDep& cd : op.cross_deps) {
      Json c{{"kind", ToString(cd.kind)}, {"peer_rank", cd.peer_rank}, {"match_key", cd.match_key}};
      if (cd.kind == CrossDepKind::kCustom) c["tag"] = cd.tag;
      arr.push_back(std::move(c));
    }
    j["cross_deps"] = std::move(arr);
  }
  if (!op.exports.empty()) j["exports"] = op.exports;
  if (op.metrics) j["metrics"] = MetricsToJson(*op.metrics);
  return j;
}

WorkloadSet FromJson(const Json& root) {
  const std::string where = "workload";
  WorkloadSet ws;
  ws.meta.schema_version = static_cast<int>(AsInt(Field(root, "schema_version", where), "schema_version"));
  if (ws.meta.schema_version != kWorkloadSchemaVersion) {
    throw ParseError(fmt::format("unsupported schema_version {} (expected {})",
                                 ws.meta.schema_version, kWorkloadSchemaVersion));
  }
  const Json& meta = Field(root, "meta", where);
  ws.meta.framework = AsString(Field(meta, "framework", "meta"), "meta.framework");
  ws.meta.model_name = AsString(Field(meta, "model_name", "meta"), "meta.model_name");
  const Json& par = Field(meta, "parallelism", "meta");
  ws.meta.parallelism.pp = static_cast<int>(AsInt(Field(par, "pp", "parallelism"), "parallelism.pp"));
  ws.meta.parallelism.tp = static_cast<int>(AsInt(Field(par, "tp", "parallelism"), "parallelism.tp"));
  ws.meta.parallelism.dp = static_cast<int>(AsInt(Field(par, "dp", "parallelism"), "parallelism.dp"));

  if (auto it = root.find("groups"); it != root.end()) {
    if (!it->is_object()) throw ParseError("groups: expected an object");
    for (const auto& [gid, members] : it->items()) {
      if (!members.is_array()) throw ParseError(fmt::format("groups.{}: expected an array", gid));
      std::vector<RankId>& out = ws.groups[gid];
      for (const Json& m : members) out.push_back(static_cast<RankId>(AsInt(m, "groups." + gid)));
    }
  }

  const Json& ranks = Field(root, "ranks", where);
  if (!ranks.is_object()) throw ParseError("ranks: expected an object keyed by rank id");
  for (const auto& [key, rj] : ranks.items()) {
    RankWorkload rw;
    try {
      std::size_t used = 0;
      rw.rank = static_cast<RankId>(std::stol(key, &used));
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ParseError(fmt::format("ranks: key '{}' is not an integer rank id", key));
    }
    const std::string rwhere = fmt::format("rank {}", rw.rank);
    rw.pp_stage = static_cast<int>(AsInt(Field(rj, "pp_stage", rwhere), rwhere + ".pp_stage"));
    rw.dp_group = AsString(Field(rj, "dp_group", rwhere), rwhere + ".dp_group");
    rw.tp_group = AsString(Field(rj, "tp_group", rwhere), rwhere + ".tp_group");
    rw.pp_group = AsString(Field(rj, "pp_group", rwhere), rwhere + ".pp_group");
    const Json& ops = Field(rj, "ops", rwhere);
    if (!ops.is_array()) throw ParseError(rwhere + ".ops: expected an array");
    rw.ops.reserve(ops.size());
    for (const Json& oj : ops) rw.ops.push_back(ParseOp(oj, rwhere));
    if (!ws.ranks.emplace(rw.rank, std::move(rw)).second) {
      throw ParseError(fmt::format("ranks: duplicate rank id {}", key));
    }
  }
  return ws;
}

Json ToJson(const WorkloadSet& ws) {
  Json root;
  root["schema_version"] = ws.meta.schema_version;
  root["meta"] = {{"framework", ws.meta.framework},
                  {"model_name", ws.meta.model_name},
                  {"parallelism",
                   {{"pp", ws.meta.parallelism.pp},
                    {"tp", ws.meta.parallelism.tp},
                    {"dp", ws.meta.parallelism.dp}}}};
  Json groups = Json::object();
  for (const auto& [gid, members] : ws.groups) groups[gid] = members;
  root["groups"] = std::move(groups);
  Json ranks = Json::object();
  for (const auto& [rank, rw] : ws.ranks) {
    Json ops = Json::array();
    for (const Operation& op : rw.ops) ops.push_back(OpToJson(op));
    ranks[std::to_string(rank)] = {{"pp_stage", rw.pp_stage},
                                   {"dp_group", rw.dp_group},
                                   {"tp_group", rw.tp_group},
                                   {"pp_group", rw.pp_group},
                                   {"ops", std::move(ops)}};
  }
  root["ranks"] = std::move(ranks);
  return root;
}

}  // namespace

WorkloadSet ParseWorkloadSet(std::string_view json_text) {
  const Json root = internal::ParseJsonText(json_text, "workload trace");
  try {
    return FromJson(root);
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("workload trace: {}", e.what()));
  }
}

WorkloadSet LoadWorkloadSetUnchecked(const std::filesystem::path& path) {
  return ParseWorkloadSet(internal::ReadFile(path));
}

WorkloadSet LoadWorkloadSet(const std::filesystem::path& path) {
  WorkloadSet ws = LoadWorkloadSetUnchecked(path);
  std::vector<Violation> violations = Validate(ws);
  if (!violations.empty()) {
    throw ValidationError(fmt::format("{}: {}", path.string(), ToString(violations.front())));
  }
  return ws;
}

std::string SerializeWorkloadSet(const WorkloadSet& ws, int indent) {
  return ToJson(ws).dump(indent);
}

void SaveWorkloadSet(const WorkloadSet& ws, const std::filesystem::path& path) {
  internal::WriteFile(path, SerializeWorkloadSet(ws, 1) + "\n");
}

}  // namespace dtsim
