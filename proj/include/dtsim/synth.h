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

#ifndef DTSIM_SYNTH_H_
#define DTSIM_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtsim/kernel_metrics.h"
#include "dtsim/slowdown.h"
#include "dtsim/workload.h"

namespace dtsim {

// gpt: transformer layers {qkv_gemm, attention, proj_gemm, layernorm,
// mlp_gemm1, gelu, mlp_gemm2, sum}. cnn: a convolution stack standing in for
// VGG-style models, layers {conv_gemm, batchnorm, relu}; `hidden` is the
// channel count and `seq_len` the spatial positions per sample.
enum class ModelFamily { kGpt, kCnn };

std::string_view ToString(ModelFamily f);

struct ModelSpec {
  std::string name;
  ModelFamily family = ModelFamily::kGpt;
  int num_layers = 1;
  int hidden = 1;
  int heads = 1;
  int seq_len = 1;
  double params_billion = 0.0;
  int microbatches = 1;
  int dtype_bytes = 4;
};

// "gpt-13b", "gpt-30b", "gpt-40b", "gpt-70b", "gpt-175b", "vgg19". FP32 and a
// single microbatch; callers override as needed.
std::optional<ModelSpec> ModelPreset(std::string_view name);
std::vector<std::string> ModelPresetNames();

enum class Schedule { kOneF1B, kGPipe, kDDP };

std::string_view ToString(Schedule s);
Schedule ParseSchedule(std::string_view s);

// duration_us = coeff_us_per_element * elements + const_us
struct CostFn {
  double coeff_us_per_element = 0.0;
  double const_us = 0.0;
  double Eval(double elements) const { return coeff_us_per_element * elements + const_us; }
  friend bool operator==(const CostFn&, const CostFn&) = default;
};

using CostTable = std::map<std::string, CostFn>;

// CSV with header `kernel_class,coeff_us_per_element,const_us`.
CostTable ParseCostTableCsv(std::string_view text);
CostTable LoadCostTable(const std::filesystem::path& path);

struct NcclKnobs {
  std::int64_t buffsize_bytes = 4 * 1024 * 1024;
  int channels = 1;
  Protocol protocol = Protocol::kSimple;
};

struct SimConfig {
  ModelSpec model;
  int pp = 1;
  int tp = 1;
  int dp = 1;
  int gpus_per_node = 8;
  Schedule schedule = Schedule::kOneF1B;
  CostTable compute_cost_table;
  NcclKnobs nccl_knobs;
  // Optional per-class profiles attached to emitted compute ops (running time
  // is filled from the op duration). Needed only by tree-ensemble models.
  std::map<std::string, KernelMetrics> kernel_metrics;

  int world_size() const { return pp * tp * dp; }
};

// Throws ConfigError describing the first inconsistency.
void CheckConfig(const SimConfig& cfg);

// Partition of `total_grad_bytes` into buckets of at most `bucket_bytes`, the
// last holding the remainder. Throws InvalidArgument unless both are > 0.
std::vector<std::int64_t> GradBuckets(std::int64_t total_grad_bytes, std::int64_t bucket_bytes);

// Rank of (stage, dp index, tp index): TP peers are adjacent, then DP
// replicas, then pipeline stages.
RankId RankOf(const SimConfig& cfg, int stage, int dp_index, int tp_index);

// Layers owned by a pipeline stage (earlier stages take the remainder).
int LayersOnStage(const SimConfig& cfg, int stage);

// Compute kernels emitted per layer per microbatch, in each direction.
int KernelsPerLayer(ModelFamily family);

// Gradient bytes produced by one layer on one rank.
std::int64_t LayerGradBytes(const SimConfig& cfg);

// Builds every rank's program. Each rank runs a single blocking chain;
// gradient-bucket AllReduces hang off the backward op that completes their
// bucket and nothing waits on them. Throws ConfigError / MissingCostError.
WorkloadSet Synthesize(const SimConfig& cfg);

// JSON config. Field names follow SimConfig; "model" is either a preset name
// or an object (with an optional "preset" key whose fields it overrides);
// "compute_cost_table" is an inline {class: {coeff_us_per_element, const_us}}
// object or a CSV path relative to `base_dir`.
SimConfig ParseSimConfig(std::string_view json_text,
                         const std::filesystem::path& base_dir = {});
SimConfig LoadSimConfig(const std::filesystem::path& path);

}  // namespace dtsim

#endif  // DTSIM_SYNTH_H_
