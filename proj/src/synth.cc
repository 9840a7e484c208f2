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

#include "dtsim/synth.h"

#include <algorithm>

#include <fmt/format.h>

#include "dtsim/error.h"

namespace dtsim {

std::string_view ToString(ModelFamily f) { return f == ModelFamily::kGpt ? "gpt" : "cnn"; }

std::string_view ToString(Schedule s) {
  switch (s) {
    case Schedule::kOneF1B:
      return "OneF1B";
    case Schedule::kGPipe:
      return "GPipe";
    case Schedule::kDDP:
      return "DDP";
  }
  return "?";
}

Schedule ParseSchedule(std::string_view s) {
  if (s == "OneF1B" || s == "1F1B") return Schedule::kOneF1B;
  if (s == "GPipe") return Schedule::kGPipe;
  if (s == "DDP") return Schedule::kDDP;
  throw ConfigError(fmt::format("unknown schedule '{}'", s));
}

std::optional<ModelSpec> ModelPreset(std::string_view name) {
  auto gpt = [](std::string n, int heads, int layers, int hidden, double billions) {
    return ModelSpec{std::move(n), ModelFamily::kGpt, layers, hidden, heads, 2048, billions, 1, 4};
  };
  if (name == "gpt-13b") return gpt("gpt-13b", 32, 40, 5120, 13);
  if (name == "gpt-30b") return gpt("gpt-30b", 48, 40, 7680, 30);
  if (name == "gpt-40b") return gpt("gpt-40b", 72, 40, 9216, 40);
  if (name == "gpt-70b") return gpt("gpt-70b", 64, 80, 8192, 70);
  if (name == "gpt-175b") return gpt("gpt-175b", 96, 96, 12288, 175);
  // 16 convolution layers at a 14x14 feature map with 512 channels: roughly
  // VGG19's convolutional trunk, not its exact shape.
  if (name == "vgg19") return ModelSpec{"vgg19", ModelFamily::kCnn, 16, 512, 1, 196, 0.14, 1, 4};
  return std::nullopt;
}

std::vector<std::string> ModelPresetNames() {
  return {"gpt-13b", "gpt-30b", "gpt-40b", "gpt-70b", "gpt-175b", "vgg19"};
}

std::vector<std::int64_t> GradBuckets(std::int64_t total_grad_bytes, std::int64_t bucket_bytes) {
  if (total_grad_bytes <= 0 || bucket_bytes <= 0) {
    throw InvalidArgument(fmt::format("grad buckets need positive sizes, got {} and {}",
                                      total_grad_bytes, bucket_bytes));
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(total_grad_bytes / bucket_bytes),
                                bucket_bytes);
  if (total_grad_bytes % bucket_bytes != 0) out.push_back(total_grad_bytes % bucket_bytes);
  return out;
}

RankId RankOf(const SimConfig& cfg, int stage, int dp_index, int tp_index) {
  return stage * cfg.tp * cfg.dp + dp_index * cfg.tp + tp_index;
}

int LayersOnStage(const SimConfig& cfg, int stage) {
  const int base = cfg.model.num_layers / cfg.pp;
  return base + (stage < cfg.model.num_layers % cfg.pp ? 1 : 0);
}

int KernelsPerLayer(ModelFamily family) { return family == ModelFamily::kGpt ? 8 : 3; }

std::int64_t LayerGradBytes(const SimConfig& cfg) {
  const std::int64_t h = cfg.model.hidden;
  if (cfg.model.family == ModelFamily::kGpt) return 12 * h * h / cfg.tp * cfg.model.dtype_bytes;
  return 9 * h * h * cfg.model.dtype_bytes;
}

void CheckConfig(const SimConfig& cfg) {
  const ModelSpec& m = cfg.model;
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (cfg.pp < 1 || cfg.tp < 1 || cfg.dp < 1) {
    fail(fmt::format("pp, tp, dp must be >= 1 (got {}, {}, {})", cfg.pp, cfg.tp, cfg.dp));
  }
  if (cfg.gpus_per_node < 1) fail("gpus_per_node must be >= 1");
  if (cfg.world_size() > cfg.gpus_per_node && cfg.world_size() % cfg.gpus_per_node != 0) {
    fail(fmt::format("{} ranks do not fill nodes of {} GPUs", cfg.world_size(), cfg.gpus_per_node));
  }
  if (m.num_layers < 1 || m.hidden < 1 || m.heads < 1 || m.seq_len < 1 || m.microbatches < 1) {
    fail("model dimensions and microbatches must be positive");
  }
  if (!(m.params_billion > 0.0)) fail("params_billion must be positive");
  if (m.dtype_bytes != 2 && m.dtype_bytes != 4) fail("dtype_bytes must be 2 or 4");
  if (m.hidden % m.heads != 0) fail(fmt::format("hidden {} not divisible by heads {}", m.hidden, m.heads));
  if (m.num_layers < cfg.pp) fail(fmt::format("{} layers cannot fill {} stages", m.num_layers, cfg.pp));
  if (m.family == ModelFamily::kGpt && m.heads % cfg.tp != 0) {
    fail(fmt::format("heads {} not divisible by tp {}", m.heads, cfg.tp));
  }
  if (m.family == ModelFamily::kCnn && cfg.tp != 1) fail("cnn models do not support tensor parallelism");
  if (cfg.schedule == Schedule::kDDP && (cfg.pp != 1 || cfg.tp != 1)) {
    fail("DDP schedule requires pp = 1 and tp = 1");
  }
  if (cfg.nccl_knobs.buffsize_bytes < 1) fail("nccl_knobs.buffsize_bytes must be positive");
  if (cfg.nccl_knobs.channels < 1) fail("nccl_knobs.channels must be >= 1");
}

namespace {

struct KernelShape {
  const char* name;
  const char* kernel_class;
  double elements;
  bool matmul;  // doubles in backward
};

std::vector<KernelShape> LayerKernels(const SimConfig& cfg) {
  const double t = cfg.model.seq_len;
  const double h = cfg.model.hidden;
  const double p = cfg.tp;
  if (cfg.model.family == ModelFamily::kGpt) {
    return {{"qkv_gemm", "GEMM", t * h * 3 * h / p, true},
            {"attention", "Attention", 2 * t * t * h / p, true},
            {"proj_gemm", "GEMM", t * h * h / p, true},
            {"layernorm", "Transform", t * h, false},
            {"mlp_gemm1", "GEMM", 4 * t * h * h / p, true},
            {"gelu", "Transform", 4 * t * h / p, false},
            {"mlp_gemm2", "GEMM", 4 * t * h * h / p, true},
            {"sum", "Sum", t * h, false}};
  }
  return {{"conv_gemm", "GEMM", 9 * t * h * h, true},
          {"batchnorm", "Transform", t * h, false},
          {"relu", "Transform", t * h, false}};
}

// TP AllReduce follows these kernels (forward and backward names).
bool TpReduceAfter(std::string_view kernel, bool forward) {
  return forward ? (kernel == "proj_gemm" || kernel == "mlp_gemm2")
                 : (kernel == "mlp_gemm1" || kernel == "qkv_gemm");
}

struct Action {
  bool forward;
  int mb;
};

std::vector<Action> StageActions(const SimConfig& cfg, int stage) {
  const int m = cfg.model.microbatches;
  std::vector<Action> out;
  if (cfg.schedule == Schedule::kGPipe) {
    for (int i = 0; i < m; ++i) out.push_back({true, i});
    for (int i = 0; i < m; ++i) out.push_back({false, i});
    return out;
  }
  // 1F1B (DDP is the one-stage case): warm-up forwards, then alternate.
  const int warmup = std::min(cfg.pp - stage, m);
  for (int i = 0; i < warmup; ++i) out.push_back({true, i});
  for (int i = 0; i < m; ++i) {
    out.push_back({false, i});
    if (warmup + i < m) out.push_back({true, warmup + i});
  }
  return out;
}

// One step of a stage program before comm batching.
struct Item {
  bool is_comm;
  bool forward;  // direction of the data flow (activations vs gradients)
  int mb;
  bool send;
};

class RankBuilder {
 public:
  RankBuilder(const SimConfig& cfg, const std::vector<KernelShape>& kernels, int stage, int d,
              int t)
      : cfg_(cfg), kernels_(kernels), stage_(stage), d_(d), t_(t) {
    rw_.rank = RankOf(cfg, stage, d, t);
    rw_.pp_stage = stage;
    rw_.tp_group = fmt::format("tp{}", stage * cfg.dp + d);
    rw_.dp_group = fmt::format("dp{}", stage * cfg.tp + t);
    rw_.pp_group = fmt::format("pp{}", d * cfg.tp + t);
    const std::int64_t width = cfg.model.hidden;
    act_bytes_ = static_cast<std::int64_t>(cfg.model.seq_len) * width * cfg.model.dtype_bytes;
  }

  RankWorkload Build() {
    std::vector<Item> items;
    for (const Action& a : StageActions(cfg_, stage_)) {
      const bool has_prev = stage_ > 0;
      const bool has_next = stage_ < cfg_.pp - 1;
      const bool recv = a.forward ? has_prev : has_next;
      const bool send = a.forward ? has_next : has_prev;
      if (recv) items.push_back({true, a.forward, a.mb, false});
      items.push_back({false, a.forward, a.mb, false});
      if (send) items.push_back({true, a.forward, a.mb, true});
    }
    // Transfers issued back to back form one batch; ordering each batch
    // forward-first on both sides of a link keeps the pairing deadlock-free.
    for (std::size_t i = 0; i < items.size();) {
      std::size_t j = i;
      while (j < items.size() && items[j].is_comm) ++j;
      std::stable_partition(items.begin() + static_cast<std::ptrdiff_t>(i),
                            items.begin() + static_cast<std::ptrdiff_t>(j),
                            [](const Item& it) { return it.forward; });
      i = j == i ? i + 1 : j;
    }
    const int last_bwd_mb = LastBackwardMicrobatch();
    for (const Item& it : items) {
      if (it.is_comm) {
        EmitTransfer(it);
      } else if (it.forward) {
        EmitForward(it.mb);
      } else {
        EmitBackward(it.mb, it.mb == last_bwd_mb);
      }
    }
    return std::move(rw_);
  }

 private:
  int LastBackwardMicrobatch() const {
    int last = 0;
    for (const Action& a : StageActions(cfg_, stage_)) {
      if (!a.forward) last = a.mb;
    }
    return last;
  }

  std::string Key(int stage, int mb, bool forward) const {
    std::string key = fmt::format("stage{}.mb{}.{}", stage, mb, forward ? "fwd" : "bwd");
    if (cfg_.tp * cfg_.dp > 1) key += fmt::format(".dp{}.tp{}", d_, t_);
    return key;
  }

  Operation& Push(OpKind kind, std::optional<double> duration, bool chained = true) {
    Operation op;
    op.op_id = next_id_++;
    op.kind = std::move(kind);
    op.duration_us = duration;
    if (last_) op.deps.push_back(*last_);
    if (chained) last_ = op.op_id;
    rw_.ops.push_back(std::move(op));
    return rw_.ops.back();
  }

  void EmitCompute(const KernelShape& k, bool forward) {
    const double elements = forward || !k.matmul ? k.elements : 2 * k.elements;
    const double duration = cfg_.compute_cost_table.at(k.kernel_class).Eval(elements);
    std::string name = forward ? std::string(k.name) : fmt::format("{}_bwd", k.name);
    Operation& op = Push(ComputeOp{std::move(name), k.kernel_class}, duration);
    if (auto it = cfg_.kernel_metrics.find(k.kernel_class); it != cfg_.kernel_metrics.end()) {
      op.metrics = it->second;
      op.metrics->running_time_us = duration;
      op.metrics->kernel_class = k.kernel_class;
    }
  }

  void EmitTpReduce() {
    Push(CollectiveOp{CollectiveKind::kAllReduce, AlgoKind::kRing, rw_.tp_group, act_bytes_},
         std::nullopt);
  }

  void EmitForward(int mb) {
    const int layers = LayersOnStage(cfg_, stage_);
    for (int l = 0; l < layers; ++l) {
      for (const KernelShape& k : kernels_) {
        EmitCompute(k, true);
        if (cfg_.tp > 1 && TpReduceAfter(k.name, true)) EmitTpReduce();
      }
    }
    if (stage_ < cfg_.pp - 1) rw_.ops.back().exports.push_back(Key(stage_, mb, true));
  }

  void EmitBackward(int mb, bool reduce_grads) {
    const int layers = LayersOnStage(cfg_, stage_);
    std::vector<std::int64_t> buckets;
    if (reduce_grads && cfg_.dp > 1) {
      buckets = GradBuckets(LayerGradBytes(cfg_) * layers, cfg_.nccl_knobs.buffsize_bytes);
    }
    std::size_t next_bucket = 0;
    std::int64_t bucket_end = buckets.empty() ? 0 : buckets.front();
    for (int l = 0; l < layers; ++l) {
      for (auto k = kernels_.rbegin(); k != kernels_.rend(); ++k) {
        EmitCompute(*k, false);
        if (cfg_.tp > 1 && TpReduceAfter(k->name, false)) EmitTpReduce();
      }
      // Gradients become ready last layer first; a bucket is launched once
      // its last byte is ready.
      const std::int64_t ready_bytes = LayerGradBytes(cfg_) * (l + 1);
      while (next_bucket < buckets.size() && bucket_end <= ready_bytes) {
        Push(CollectiveOp{CollectiveKind::kAllReduce, AlgoKind::kRing, rw_.dp_group,
                          buckets[next_bucket]},
             std::nullopt, /*chained=*/false);
        if (++next_bucket < buckets.size()) bucket_end += buckets[next_bucket];
      }
    }
    if (stage_ > 0) {
      // The exporter is the chain's tail, not a trailing bucket reduction.
      for (auto it = rw_.ops.rbegin(); it != rw_.ops.rend(); ++it) {
        if (it->op_id == *last_) {
          it->exports.push_back(Key(stage_, mb, false));
          break;
        }
      }
    }
  }

  void EmitTransfer(const Item& it) {
    const int peer_stage = it.forward == it.send ? stage_ + 1 : stage_ - 1;
    const RankId peer = RankOf(cfg_, peer_stage, d_, t_);
    Operation& op = Push(
        P2POp{it.send ? P2PDirection::kSend : P2PDirection::kRecv, peer, act_bytes_},
        std::nullopt);
    if (!it.send) {
      CrossDep cd;
      cd.kind = it.forward ? CrossDepKind::kActivationFwd : CrossDepKind::kGradBwd;
      cd.peer_rank = peer;
      cd.match_key = Key(peer_stage, it.mb, it.forward);
      op.cross_deps.push_back(std::move(cd));
    }
  }

  const SimConfig& cfg_;
  const std::vector<KernelShape>& kernels_;
  int stage_, d_, t_;
  std::int64_t act_bytes_ = 0;
  RankWorkload rw_;
  OpId next_id_ = 0;
  std::optional<OpId> last_;
};

}  // namespace

WorkloadSet Synthesize(const SimConfig& cfg) {
  CheckConfig(cfg);
  const std::vector<KernelShape> kernels = LayerKernels(cfg);
  for (const KernelShape& k : kernels) {
    if (!cfg.compute_cost_table.count(k.kernel_class)) {
      throw MissingCostError(
          fmt::format("compute cost table has no entry for kernel class '{}'", k.kernel_class));
    }
  }

  WorkloadSet ws;
  ws.meta.framework = cfg.schedule == Schedule::kDDP ? "ddp" : "megatron";
  ws.meta.model_name = cfg.model.name;
  ws.meta.parallelism = {cfg.pp, cfg.tp, cfg.dp};
  for (int s = 0; s < cfg.pp; ++s) {
    for (int d = 0; d < cfg.dp; ++d) {
      for (int t = 0; t < cfg.tp; ++t) {
        const RankId r = RankOf(cfg, s, d, t);
        ws.groups[fmt::format("tp{}", s * cfg.dp + d)].push_back(r);
        ws.groups[fmt::format("dp{}", s * cfg.tp + t)].push_back(r);
        ws.groups[fmt::format("pp{}", d * cfg.tp + t)].push_back(r);
        ws.ranks.emplace(r, RankBuilder(cfg, kernels, s, d, t).Build());
      }
    }
  }
  for (auto& [gid, members] : ws.groups) std::sort(members.begin(), members.end());
  return ws;
}

}  // namespace dtsim
