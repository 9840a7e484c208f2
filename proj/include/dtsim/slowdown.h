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

#ifndef DTSIM_SLOWDOWN_H_
#define DTSIM_SLOWDOWN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dtsim/comm_model.h"
#include "dtsim/kernel_metrics.h"
#include "dtsim/timeline.h"
#include "dtsim/workload.h"

namespace dtsim {

enum class Protocol { kLL, kLL128, kSimple };

std::string_view ToString(Protocol p);
Protocol ParseProtocol(std::string_view s);

// Communication side of an overlap: what the concurrently running comm kernel
// is doing.
struct OverlapContext {
  Protocol protocol = Protocol::kSimple;
  AlgoKind algorithm = AlgoKind::kRing;
  CommKind collective = CommKind::kAllReduce;
  std::int64_t bucket_bytes = 1;
  int channels = 1;
};

inline constexpr int kMaxTreeDepth = 12;
inline constexpr double kDefaultClampMax = 8.0;

// Feature names are the field names of KernelMetrics and OverlapContext.
// Categorical fields (kernel_class, protocol, algorithm, collective) are
// addressed as one-hot indicators "<field>=<value>", valued 1 or 0.
enum class FeatureId : std::uint8_t {
  kUnknown,
  kRunningTime,
  kComputeThroughput,
  kMemoryThroughput,
  kDramThroughput,
  kAchievedOccupancy,
  kL1HitRate,
  kL2HitRate,
  kBucketBytes,
  kChannels,
  kKernelClassIs,
  kProtocolIs,
  kAlgorithmIs,
  kCollectiveIs,
};

struct FeatureRef {
  FeatureId id = FeatureId::kUnknown;
  std::string category;  // for the *Is indicators
};

// Resolves a feature name; kUnknown if it names no input field or an
// impossible category of a closed enumeration.
FeatureRef ResolveFeature(std::string_view name);

struct TreeNode {
  bool is_leaf = false;
  double leaf_value = 0.0;
  std::string feature;
  FeatureRef resolved;
  double threshold = 0.0;  // go left iff value < threshold
  int left = -1;
  int right = -1;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct TreeEnsemble {
  double base_score = 0.0;
  double clamp_max = kDefaultClampMax;
  std::vector<DecisionTree> trees;
};

struct ConstantFactor {
  double factor = 1.0;
};

class SlowdownModel {
 public:
  // Baseline heuristic: the same factor for every overlapped kernel.
  static SlowdownModel Constant(double factor);
  // Validates structure and depth (throws ParseError / DepthExceededError) and
  // resolves feature names. Unknown names are kept and surface at Predict.
  static SlowdownModel Ensemble(TreeEnsemble ensemble);

  bool is_constant() const { return std::holds_alternative<ConstantFactor>(variant_); }
  const ConstantFactor* constant() const { return std::get_if<ConstantFactor>(&variant_); }
  const TreeEnsemble* ensemble() const { return std::get_if<TreeEnsemble>(&variant_); }

 private:
  std::variant<ConstantFactor, TreeEnsemble> variant_;
};

// Depth of a tree in edges from the root to its deepest leaf. Throws
// ParseError when a child index is out of range or a node is reachable twice.
int TreeDepth(const DecisionTree& tree);

// Leaf reached by `tree` for the given inputs.
double TraverseTree(const DecisionTree& tree, const KernelMetrics& metrics,
                    const OverlapContext& ctx);

// Slowdown factor in [1, clamp_max] for the ensemble (base + sum of leaves);
// ConstantFactor returns its factor. Throws UnknownFeatureError when a
// traversed split names a feature absent from the inputs.
double Predict(const SlowdownModel& model, const KernelMetrics& metrics, const OverlapContext& ctx);

// Model file: {"constant": f} or
// {"base_score": b, "clamp_max": c, "trees": [{"nodes": [...]}, ...]} with
// nodes {"leaf": v} or {"feature": name, "threshold": t, "left": i, "right": j}.
SlowdownModel ParseSlowdownModel(std::string_view json_text);
SlowdownModel LoadSlowdownModel(const std::filesystem::path& path);
std::string SerializeSlowdownModel(const SlowdownModel& model);

// NCCL knobs that are properties of the job rather than of one comm op.
struct CommKnobs {
  Protocol protocol = Protocol::kSimple;
  int channels = 1;
};

// Per-op slowdown factors, indexed like RankWorkload::ops (1.0 = unchanged).
using OpFactors = std::map<RankId, std::vector<double>>;

struct SlowdownAdjustment {
  // Overlapped compute events stretched in place to base duration * factor.
  // Later events are not moved; recomposing is the engine's job.
  Timeline timeline;
  OpFactors factors;
  std::size_t adjusted_ops = 0;
};

// Multiplies the base duration of every compute op that intersects a comm
// event of its rank by Predict(...), using the OverlapContext of the
// longest-overlapping comm op. Communication durations are left untouched.
// Throws MissingMetricsError when a tree ensemble meets an overlapped op
// without KernelMetrics.
SlowdownAdjustment ApplySlowdown(const Timeline& draft, const WorkloadSet& ws,
                                 const SlowdownModel& model, const CommKnobs& knobs);

}  // namespace dtsim

#endif  // DTSIM_SLOWDOWN_H_
