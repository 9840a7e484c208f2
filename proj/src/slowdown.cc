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

#include "dtsim/slowdown.h"

#include <algorithm>
#include <cmath>

#include "dtsim/error.h"
#include "json_util.h"

namespace dtsim {

std::string_view ToString(Protocol p) {
  switch (p) {
    case Protocol::kLL:
      return "LL";
    case Protocol::kLL128:
      return "LL128";
    case Protocol::kSimple:
      return "Simple";
  }
  return "?";
}

Protocol ParseProtocol(std::string_view s) {
  if (s == "LL") return Protocol::kLL;
  if (s == "LL128") return Protocol::kLL128;
  if (s == "Simple") return Protocol::kSimple;
  throw ParseError(fmt::format("unknown protocol '{}'", s));
}

FeatureRef ResolveFeature(std::string_view name) {
  static const std::pair<std::string_view, FeatureId> kNumeric[] = {
      {"running_time_us", FeatureId::kRunningTime},
      {"compute_throughput_pct", FeatureId::kComputeThroughput},
      {"memory_throughput_pct", FeatureId::kMemoryThroughput},
      {"dram_throughput_pct", FeatureId::kDramThroughput},
      {"achieved_occupancy_pct", FeatureId::kAchievedOccupancy},
      {"l1_hit_rate_pct", FeatureId::kL1HitRate},
      {"l2_hit_rate_pct", FeatureId::kL2HitRate},
      {"bucket_bytes", FeatureId::kBucketBytes},
      {"channels", FeatureId::kChannels},
  };
  for (const auto& [n, id] : kNumeric) {
    if (n == name) return {id, ""};
  }
  const std::size_t eq = name.find('=');
  if (eq == std::string_view::npos) return {};
  const std::string_view field = name.substr(0, eq);
  const std::string category(name.substr(eq + 1));
  if (category.empty()) return {};
  try {
    if (field == "kernel_class") return {FeatureId::kKernelClassIs, category};
    if (field == "protocol") {
      ParseProtocol(category);
      return {FeatureId::kProtocolIs, category};
    }
    if (field == "algorithm") {
      ParseAlgoKind(category);
      return {FeatureId::kAlgorithmIs, category};
    }
    if (field == "collective") {
      ParseCommKind(category);
      return {FeatureId::kCollectiveIs, category};
    }
  } catch (const ParseError&) {
    return {};
  }
  return {};
}

namespace {

double FeatureValue(const TreeNode& node, const KernelMetrics& m, const OverlapContext& ctx) {
  const FeatureRef& f = node.resolved;
  auto indicator = [](bool b) { return b ? 1.0 : 0.0; };
  switch (f.id) {
    case FeatureId::kRunningTime:
      return m.running_time_us;
    case FeatureId::kComputeThroughput:
      return m.compute_throughput_pct;
    case FeatureId::kMemoryThroughput:
      return m.memory_throughput_pct;
    case FeatureId::kDramThroughput:
      return m.dram_throughput_pct;
    case FeatureId::kAchievedOccupancy:
      return m.achieved_occupancy_pct;
    case FeatureId::kL1HitRate:
      return m.l1_hit_rate_pct;
    case FeatureId::kL2HitRate:
      return m.l2_hit_rate_pct;
    case FeatureId::kBucketBytes:
      return static_cast<double>(ctx.bucket_bytes);
    case FeatureId::kChannels:
      return static_cast<double>(ctx.channels);
    case FeatureId::kKernelClassIs:
      return indicator(m.kernel_class == f.category);
    case FeatureId::kProtocolIs:
      return indicator(ToString(ctx.protocol) == f.category);
    case FeatureId::kAlgorithmIs:
      return indicator(ToString(ctx.algorithm) == f.category);
    case FeatureId::kCollectiveIs:
      return indicator(ToString(ctx.collective) == f.category);
    case FeatureId::kUnknown:
      break;
  }
  throw UnknownFeatureError(fmt::format("model splits on unknown feature '{}'", node.feature));
}

}  // namespace

int TreeDepth(const DecisionTree& tree) {
  if (tree.nodes.empty()) throw ParseError("tree has no nodes");
  const int n = static_cast<int>(tree.nodes.size());
  std::vector<bool> seen(tree.nodes.size(), false);
  // (node, depth) stack; every node may be reached once.
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int depth = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    if (i < 0 || i >= n) throw ParseError(fmt::format("tree child index {} out of range", i));
    if (seen[i]) throw ParseError(fmt::format("tree node {} reachable twice", i));
    seen[i] = true;
    const TreeNode& node = tree.nodes[i];
    if (node.is_leaf) {
      depth = std::max(depth, d);
    } else {
      stack.push_back({node.right, d + 1});
      stack.push_back({node.left, d + 1});
    }
  }
  return depth;
}

SlowdownModel SlowdownModel::Constant(double factor) {
  if (!(std::isfinite(factor) && factor >= 1.0)) {
    throw InvalidArgument(fmt::format("constant slowdown factor must be >= 1, got {}", factor));
  }
  SlowdownModel m;
  m.variant_ = ConstantFactor{factor};
  return m;
}

SlowdownModel SlowdownModel::Ensemble(TreeEnsemble ensemble) {
  if (!(std::isfinite(ensemble.clamp_max) && ensemble.clamp_max >= 1.0)) {
    throw ParseError(fmt::format("clamp_max must be >= 1, got {}", ensemble.clamp_max));
  }
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    DecisionTree& tree = ensemble.trees[t];
    const int depth = TreeDepth(tree);
    if (depth > kMaxTreeDepth) {
      throw DepthExceededError(
          fmt::format("tree {} has depth {} (max {})", t, depth, kMaxTreeDepth));
    }
    for (TreeNode& node : tree.nodes) {
      if (!node.is_leaf) node.resolved = ResolveFeature(node.feature);
    }
  }
  SlowdownModel m;
  m.variant_ = std::move(ensemble);
  return m;
}

double TraverseTree(const DecisionTree& tree, const KernelMetrics& metrics,
                    const OverlapContext& ctx) {
  int i = 0;
  while (true) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
    if (node.is_leaf) return node.leaf_value;
    i = FeatureValue(node, metrics, ctx) < node.threshold ? node.left : node.right;
  }
}

double Predict(const SlowdownModel& model, const KernelMetrics& metrics, const OverlapContext& ctx) {
  if (const ConstantFactor* c = model.constant()) return c->factor;
  const TreeEnsemble& e = *model.ensemble();
  double sum = e.base_score;
  for (const DecisionTree& tree : e.trees) sum += TraverseTree(tree, metrics, ctx);
  if (std::isnan(sum)) return 1.0;
  return std::clamp(sum, 1.0, e.clamp_max);
}

// ---------------------------------------------------------------------------
// Model files.

namespace {

using internal::AsInt;
using internal::AsNumber;
using internal::AsString;
using internal::Field;
using internal::Json;

SlowdownModel FromJson(const Json& root) {
  if (!root.is_object()) throw ParseError("slowdown model: expected an object");
  if (root.contains("constant")) {
    const double f = AsNumber(root.at("constant"), "constant");
    if (!(f >= 1.0)) throw ParseError(fmt::format("constant factor must be >= 1, got {}", f));
    return SlowdownModel::Constant(f);
  }
  TreeEnsemble e;
  if (auto it = root.find("base_score"); it != root.end()) e.base_score = AsNumber(*it, "base_score");
  if (auto it = root.find("clamp_max"); it != root.end()) e.clamp_max = AsNumber(*it, "clamp_max");
  const Json& trees = Field(root, "trees", "slowdown model");
  if (!trees.is_array()) throw ParseError("trees: expected an array");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string where = fmt::format("trees[{}]", t);
    const Json& nodes = Field(trees[t], "nodes", where);
    if (!nodes.is_array()) throw ParseError(where + ".nodes: expected an array");
    DecisionTree tree;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Json& nj = nodes[i];
      const std::string nwhere = fmt::format("{}.nodes[{}]", where, i);
      TreeNode node;
      if (nj.contains("leaf")) {
        node.is_leaf = true;
        node.leaf_value = AsNumber(nj.at("leaf"), nwhere + ".leaf");
      } else {
        node.feature = AsString(Field(nj, "feature", nwhere), nwhere + ".feature");
        node.threshold = AsNumber(Field(nj, "threshold", nwhere), nwhere + ".threshold");
        node.left = static_cast<int>(AsInt(Field(nj, "left", nwhere), nwhere + ".left"));
        node.right = static_cast<int>(AsInt(Field(nj, "right", nwhere), nwhere + ".right"));
        if (ResolveFeature(node.feature).id == FeatureId::kUnknown) {
          throw BadFeatureError(fmt::format("{}: unknown feature '{}'", nwhere, node.feature));
        }
      }
      tree.nodes.push_back(std::move(node));
    }
    e.trees.push_back(std::move(tree));
  }
  return SlowdownModel::Ensemble(std::move(e));
}

}  // namespace

SlowdownModel ParseSlowdownModel(std::string_view json_text) {
  const Json root = internal::ParseJsonText(json_text, "slowdown model");
  try {
    return FromJson(root);
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("slowdown model: {}", e.what()));
  }
}

SlowdownModel LoadSlowdownModel(const std::filesystem::path& path) {
  return ParseSlowdownModel(internal::ReadFile(path));
}

std::string SerializeSlowdownModel(const SlowdownModel& model) {
  if (const ConstantFactor* c = model.constant()) return Json{{"constant", c->factor}}.dump();
  const TreeEnsemble& e = *model.ensemble();
  Json trees = Json::array();
  for (const DecisionTree& tree : e.trees) {
    Json nodes = Json::array();
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf) {
        nodes.push_back({{"leaf", n.leaf_value}});
      } else {
        nodes.push_back(
            {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return Json{{"base_score", e.base_score}, {"clamp_max", e.clamp_max}, {"trees", std::move(trees)}}
      .dump();
}

// ---------------------------------------------------------------------------
// Timeline adjustment.

SlowdownAdjustment ApplySlowdown(const Timeline& draft, const WorkloadSet& ws,
                                 const SlowdownModel& model, const CommKnobs& knobs) {
  SlowdownAdjustment out;
  out.timeline = draft;
  for (const auto& [rank, rw] : ws.ranks) out.factors[rank].assign(rw.ops.size(), 1.0);

  const std::vector<OverlapRecord> overlaps = DetectOverlaps(draft);
  for (const OverlapRecord& rec : overlaps) {
    if (!rec.longest) continue;
    const TimelineEvent& ce = draft.events[rec.compute_event];
    const TimelineEvent& me = draft.events[rec.comm_event];
    const RankWorkload& rw = ws.ranks.at(ce.rank);
    const Operation& op = rw.ops[ce.op_index];
    const Operation& comm = rw.ops[me.op_index];

    OverlapContext ctx;
    ctx.protocol = knobs.protocol;
    ctx.channels = knobs.channels;
    if (const auto* c = std::get_if<CollectiveOp>(&comm.kind)) {
      ctx.collective = ToCommKind(c->collective);
      ctx.algorithm = c->algorithm;
      ctx.bucket_bytes = c->tensor_bytes;
    } else if (const auto* p = std::get_if<P2POp>(&comm.kind)) {
      ctx.collective = CommKind::kP2P;
      ctx.algorithm = AlgoKind::kRing;
      ctx.bucket_bytes = p->tensor_bytes;
    }

    double factor = 1.0;
    if (model.is_constant()) {
      factor = model.constant()->factor;
    } else {
      if (!op.metrics) {
        throw MissingMetricsError(fmt::format("rank {} op {} overlaps communication but has no metrics",
                                              ce.rank, op.op_id));
      }
      factor = Predict(model, *op.metrics, ctx);
    }
    out.factors[ce.rank][ce.op_index] = factor;
    if (factor != 1.0) {
      TimelineEvent& adjusted = out.timeline.events[rec.compute_event];
      adjusted.end_us = adjusted.start_us + op.duration_us.value_or(ce.duration_us()) * factor;
      ++out.adjusted_ops;
    }
  }
  return out;
}

}  // namespace dtsim
