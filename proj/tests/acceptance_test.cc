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

// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dtsim/comm_model.h"
#include "dtsim/engine.h"
#include "dtsim/error.h"
#include "dtsim/slowdown.h"
#include "dtsim/synth.h"
#include "dtsim/units.h"
#include "oracles/oracles.h"
#include "test_util.h"

namespace dtsim {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double Since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

json ReadJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

// Every equation has at least 20 frozen cases; relative error < 1e-12; < 1 s.
Outcome EquationFidelity() {
  const Clock::time_point t0 = Clock::now();
  std::ifstream in(testing::TestData("equation_cases.csv"));
  std::string line;
  std::getline(in, line);
  std::map<std::string, int> count;
  double worst = 0.0;
  while (std::getline(in, line)) {
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    const auto slash = c[0].find('/');
    CommParams p;
    p.alpha_us = std::stod(c[4]);
    p.beta_us = std::stod(c[5]);
    p.gamma_us = std::stod(c[6]);
    p.delta_us_per_byte = std::stod(c[7]);
    p.eta = std::stoll(c[8]);
    const double expected = std::stod(c[9]);
    const double got = EstimateCollective(ParseCollectiveKind(c[0].substr(0, slash)),
                                          ParseAlgoKind(c[0].substr(slash + 1)), std::stoll(c[1]),
                                          std::stoi(c[2]), std::stoi(c[3]), p);
    worst = std::max(worst, std::abs(got - expected) / expected);
    ++count[c[0]];
  }
  const double secs = Since(t0);
  int fewest = count.empty() ? 0 : 1 << 30;
  for (const auto& [eq, n] : count) fewest = std::min(fewest, n);
  const bool pass = count.size() == 4 && fewest >= 20 && worst < 1e-12 && secs < 1.0;
  return {pass, fmt::format("equations={} min_cases={} max_rel_err={:.3g} seconds={:.3f}",
                            count.size(), fewest, worst, secs)};
}

// Reduce term 219.89 us and per-round intra/inter 74.61/112.9 us exactly;
// total is the four-component sum.
Outcome AllReduceBreakdown() {
  const CommParamDB db =
      Calibrate(LoadMeasurements(testing::RepoData("h800_allreduce_breakdown.csv")));
  const std::int64_t bytes = 32 * kMiB;
  const CommParams p = db.Lookup({CommKind::kAllReduce, AlgoKind::kRing, Interconnect::kIB, 32, 4, bytes});
  const CommBreakdown b =
      BreakdownCollective(CollectiveKind::kAllReduce, AlgoKind::kRing, bytes, 32, 4, p);
  const bool pass = db.size() == 7 && b.reduce_us == 219.89 && b.intra_per_round_us == 74.61 &&
                    b.inter_per_round_us == 112.9 &&
                    b.total_us() == b.setup_us + b.intra_us + b.inter_us + b.reduce_us;
  return {pass, fmt::format("setup={} intra_rt={} inter_rt={} reduce={} eta={} total={}", b.setup_us,
                            b.intra_per_round_us, b.inter_per_round_us, b.reduce_us, b.eta,
                            b.total_us())};
}

// 100 random DAGs against the longest path; 1F1B pp 2..4 x mb 1..6 against
// the tick oracle; < 30 s in total.
Outcome SchedulingOracle() {
  const Clock::time_point t0 = Clock::now();
  const CommParamDB zero = testing::ZeroCommDB();
  int dag_ok = 0;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    const WorkloadSet ws = testing::RandomWorkload(seed, 8, 200);
    const auto expected = oracle::LongestPath(ws, [](RankId, const Operation&) { return 0.0; });
    if (expected && Compose(ws, zero, {}).step_time_us() == *expected) ++dag_ok;
  }
  int pipe_ok = 0;
  int pipe_total = 0;
  for (int pp = 2; pp <= 4; ++pp) {
    for (int mb = 1; mb <= 6; ++mb) {
      const SimConfig cfg = testing::ToyGpt(pp, 1, 1, pp + 1, mb);
      std::vector<std::vector<oracle::Step>> programs;
      for (int s = 0; s < pp; ++s) {
        const int ticks = LayersOnStage(cfg, s) * KernelsPerLayer(ModelFamily::kGpt);
        programs.push_back(oracle::OneF1BProgram(pp, s, mb, ticks, ticks));
      }
      const auto expected = oracle::RunPipelineTicks(programs);
      const SimResult r = Simulate(Synthesize(cfg), zero, SlowdownModel::Constant(1.0), {});
      ++pipe_total;
      if (expected && r.step_time_us == static_cast<double>(*expected)) ++pipe_ok;
    }
  }
  const double secs = Since(t0);
  return {dag_ok == 100 && pipe_ok == pipe_total && secs < 30.0,
          fmt::format("dags={}/100 pipelines={}/{} seconds={:.2f}", dag_ok, pipe_ok, pipe_total, secs)};
}

// 1000 random ready-time vectors: the collective starts at the maximum, both
// through SyncStart and through a composed timeline.
Outcome SyncRule() {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> ranks_dist(2, 8);
  std::uniform_real_distribution<double> time_dist(0.0, 1000.0);
  const CommParamDB db = testing::ZeroCommDB();
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = ranks_dist(rng);
    std::vector<double> ready(static_cast<std::size_t>(n));
    for (double& t : ready) t = time_dist(rng);
    std::vector<double> sorted = ready;
    std::sort(sorted.begin(), sorted.end());
    const double expected = sorted.back();

    std::vector<RankId> members(static_cast<std::size_t>(n));
    std::iota(members.begin(), members.end(), 0);
    WorkloadSet ws = testing::Skeleton(n, {{"g", members}});
    for (RankId r = 0; r < n; ++r) {
      ws.ranks[r].ops = {testing::Compute(0, ready[r]), testing::Collective(1, "g", 1024, {0})};
    }
    const Timeline tl = Compose(ws, db, {});
    bool engine_ok = true;
    for (const TimelineEvent& e : tl.events) {
      if (e.lane == Lane::kComm && e.start_us != expected) engine_ok = false;
    }
    const CommKind kind = i % 2 == 0 ? CommKind::kAllReduce : CommKind::kAllGather;
    if (SyncStart(ready, kind) == expected && engine_ok) ++ok;
  }
  return {ok == 1000, fmt::format("vectors={}/1000", ok)};
}

// Constant factor f over overlapped fraction p: compute busy time becomes
// base * (1 + p(f - 1)) within 1e-9; with f = 1 simulate equals compose.
Outcome OverlapAccounting() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double comm_us = 5.0;
  CommParamDB db;
  CommParams flat;
  flat.alpha_us = comm_us;
  db.Insert({CommKind::kAllReduce, AlgoKind::kRing, Interconnect::kNVLink, 2, 1, 1}, flat);
  db.set_extrapolation(Extrapolation::kClampToEdge);

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Both ranks run the same chain; an AllReduce launches together with
    // each overlapped op and ends before it does.
    WorkloadSet ws = testing::Skeleton(2, {{"g", {0, 1}}});
    std::vector<Operation> ops;
    double base = 0.0;
    double overlapped = 0.0;
    OpId id = 0;
    std::optional<OpId> prev;
    for (int k = 0; k < 12; ++k) {
      const bool overlap = u(rng) < 0.5;
      const double d = overlap ? comm_us * (1.0 + 4.0 * u(rng)) : 1.0 + 20.0 * u(rng);
      std::vector<OpId> deps;
      if (prev) deps.push_back(*prev);
      if (overlap) ops.push_back(testing::Collective(id++, "g", 4096, deps));
      ops.push_back(testing::Compute(id, d, deps));
      prev = id++;
      base += d;
      if (overlap) overlapped += d;
    }
    ws.ranks[0].ops = ops;
    ws.ranks[1].ops = ops;
    const double f = 1.0 + 2.0 * u(rng);
    const double p = overlapped / base;
    const SimResult r = Simulate(ws, db, SlowdownModel::Constant(f), {});
    const double expected = base * (1.0 + p * (f - 1.0));
    for (const auto& [rank, s] : r.per_rank) {
      worst = std::max(worst, std::abs(s.compute_busy_us - expected));
    }
  }

  bool identical = true;
  for (std::uint64_t seed = 500; seed < 520; ++seed) {
    const WorkloadSet ws = testing::RandomWorkload(seed);
    const CommParamDB zero = testing::ZeroCommDB();
    const SimResult r = Simulate(ws, zero, SlowdownModel::Constant(1.0), {});
    const Timeline draft = Compose(ws, zero, {});
    identical &= r.timeline == draft && r.step_time_us == draft.step_time_us();
  }
  const SimConfig gpt = testing::ToyGpt(2, 2, 2, 4, 4);
  const WorkloadSet gws = Synthesize(gpt);
  const CommParamDB grid = LoadParamDB(testing::RepoData("h800_grid_params.csv"));
  CommParamDB clamped = grid;
  clamped.set_extrapolation(Extrapolation::kClampToEdge);
  identical &= Simulate(gws, clamped, SlowdownModel::Constant(1.0), {}).timeline == Compose(gws, clamped, {});

  return {worst <= 1e-9 && identical,
          fmt::format("max_abs_err_us={:.3g} f1_bit_exact={}", worst, identical)};
}

// Fixture ensemble on 50 inputs matches the traversal oracle exactly, stays
// within [1, clamp]; a depth-13 model is rejected.
Outcome SlowdownInference() {
  const SlowdownModel model = LoadSlowdownModel(testing::TestData("slowdown_ensemble.json"));
  const json model_json = ReadJson(testing::TestData("slowdown_ensemble.json"));
  const json inputs = ReadJson(testing::TestData("slowdown_inputs.json"));
  const double clamp = model.ensemble()->clamp_max;
  int exact = 0;
  int in_range = 0;
  for (const json& in : inputs) {
    KernelMetrics m;
    m.running_time_us = in.at("running_time_us");
    m.compute_throughput_pct = in.at("compute_throughput_pct");
    m.memory_throughput_pct = in.at("memory_throughput_pct");
    m.dram_throughput_pct = in.at("dram_throughput_pct");
    m.achieved_occupancy_pct = in.at("achieved_occupancy_pct");
    m.l1_hit_rate_pct = in.at("l1_hit_rate_pct");
    m.l2_hit_rate_pct = in.at("l2_hit_rate_pct");
    m.kernel_class = in.at("kernel_class");
    OverlapContext c;
    c.bucket_bytes = in.at("bucket_bytes");
    c.channels = in.at("channels");
    c.protocol = ParseProtocol(in.at("protocol").get<std::string>());
    c.algorithm = ParseAlgoKind(in.at("algorithm").get<std::string>());
    c.collective = ParseCommKind(in.at("collective").get<std::string>());
    const double got = Predict(model, m, c);
    if (got == oracle::PredictJson(model_json, in) && got == in.at("expected").get<double>()) ++exact;
    if (got >= 1.0 && got <= clamp) ++in_range;
  }
  bool rejected = false;
  try {
    LoadSlowdownModel(testing::TestData("slowdown_depth13.json"));
  } catch (const DepthExceededError&) {
    rejected = true;
  }
  const int n = static_cast<int>(inputs.size());
  return {n == 50 && exact == n && in_range == n && rejected,
          fmt::format("exact={}/{} in_range={}/{} depth13_rejected={}", exact, n, in_range, n, rejected)};
}

// GPT-175B, pp 16 x tp 8 x dp {1,2,4,8}: execution time grows with exponent
// < 2 in rank count, 1024 ranks finish in < 600 s, reruns are bit-identical.
Outcome ScalingAndDeterminism() {
  SimConfig cfg = LoadSimConfig(testing::RepoData("configs/gpt175b_16x8x8.json"));
  const CommParamDB db = LoadParamDB(testing::RepoData("h800_grid_params.csv"));
  std::vector<double> xs;
  std::vector<double> ys;
  double largest_total = 0.0;
  bool identical = true;
  std::string detail;
  for (int dp : {1, 2, 4, 8}) {
    cfg.dp = dp;
    const Clock::time_point t0 = Clock::now();
    const WorkloadSet ws = Synthesize(cfg);
    SimOptions opts;
    opts.topology.gpus_per_node = cfg.gpus_per_node;
    opts.knobs = {cfg.nccl_knobs.protocol, cfg.nccl_knobs.channels};
    const Clock::time_point t1 = Clock::now();
    const SimResult r = Simulate(ws, db, SlowdownModel::Constant(1.0), opts);
    const double exec = Since(t1);
    const double total = Since(t0);
    xs.push_back(std::log(static_cast<double>(cfg.world_size())));
    ys.push_back(std::log(exec));
    detail += fmt::format("{}:{:.2f}s ", cfg.world_size(), exec);
    if (dp == 8) {
      largest_total = total;
      const SimResult again = Simulate(ws, db, SlowdownModel::Constant(1.0), opts);
      identical = again.step_time_us == r.step_time_us && again.timeline == r.timeline &&
                  again.factors == r.factors;
    }
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double exponent = sxy / sxx;
  return {exponent < 2.0 && largest_total < 600.0 && identical,
          fmt::format("{}exponent={:.3f} ranks1024_seconds={:.2f} bit_identical={}", detail, exponent,
                      largest_total, identical)};
}

// Ring AllReduce bus bandwidth 2(N-1)/N * bytes / time does not rise as
// messages shrink over 64 KiB .. 16 MiB, for every profiled ring family.
Outcome BusBandwidthShape() {
  const CommParamDB db = LoadParamDB(testing::RepoData("h800_grid_params.csv"));
  int families = 0;
  int violations = 0;
  for (const auto& [family, sizes] : db.entries()) {
    if (family.collective != CommKind::kAllReduce || family.algorithm != AlgoKind::kRing) continue;
    ++families;
    const int n = family.n_devices;
    double prev = 0.0;
    for (std::int64_t b = std::int64_t{1} << 16; b <= std::int64_t{1} << 24; b *= 2) {
      const ParamKey key{family.collective, family.algorithm, family.interconnect, n, family.n_nodes, b};
      const double t = EstimateCollective(CollectiveKind::kAllReduce, AlgoKind::kRing, b, n,
                                          family.n_nodes, db.Lookup(key));
      const double busbw = static_cast<double>(b) / t * 2.0 * (n - 1) / n;
      if (busbw < prev) ++violations;
      prev = busbw;
    }
  }
  return {families > 0 && violations == 0,
          fmt::format("families={} violations={}", families, violations)};
}

}  // namespace
}  // namespace dtsim

int main() {
  using dtsim::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"equation_fidelity", dtsim::EquationFidelity},
      {"allreduce_breakdown_fixture", dtsim::AllReduceBreakdown},
      {"scheduling_oracle_equivalence", dtsim::SchedulingOracle},
      {"synchronization_rule", dtsim::SyncRule},
      {"overlap_accounting", dtsim::OverlapAccounting},
      {"slowdown_inference", dtsim::SlowdownInference},
      {"simulation_cost_scaling", dtsim::ScalingAndDeterminism},
      {"bus_bandwidth_small_messages", dtsim::BusBandwidthShape},
  };
  int failures = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
