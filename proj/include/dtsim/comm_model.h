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

#ifndef DTSIM_COMM_MODEL_H_
#define DTSIM_COMM_MODEL_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtsim/workload.h"

namespace dtsim {

// A collective kind or point-to-point transfer; keys the parameter database.
enum class CommKind { kAllReduce, kAllGather, kReduceScatter, kP2P };
enum class Interconnect { kNVLink, kIB, kTCP };

std::string_view ToString(CommKind kind);
std::string_view ToString(Interconnect ic);
CommKind ParseCommKind(std::string_view s);
Interconnect ParseInterconnect(std::string_view s);
CommKind ToCommKind(CollectiveKind kind);

// Profiled white-box parameters of one communication kernel configuration.
//   alpha: connection setup time
//   beta:  intra-server per-chunk transmission time
//   gamma: inter-server per-chunk transmission time
//   delta: reciprocal reduce throughput (us per byte)
//   eta:   number of chunk rounds
struct CommParams {
  double alpha_us = 0.0;
  double beta_us = 0.0;
  double gamma_us = 0.0;
  double delta_us_per_byte = 0.0;
  std::int64_t eta = 1;
  std::int64_t chunk_bytes = 1;

  friend bool operator==(const CommParams&, const CommParams&) = default;
};

// Everything that selects a parameter set except the message size.
struct ParamFamily {
  CommKind collective = CommKind::kAllReduce;
  AlgoKind algorithm = AlgoKind::kRing;
  Interconnect interconnect = Interconnect::kNVLink;
  int n_devices = 1;
  int n_nodes = 1;

  friend auto operator<=>(const ParamFamily&, const ParamFamily&) = default;
};

struct ParamKey {
  CommKind collective = CommKind::kAllReduce;
  AlgoKind algorithm = AlgoKind::kRing;
  Interconnect interconnect = Interconnect::kNVLink;
  int n_devices = 1;
  int n_nodes = 1;
  std::int64_t tensor_bytes = 0;

  ParamFamily family() const {
    return {collective, algorithm, interconnect, n_devices, n_nodes};
  }
  friend auto operator<=>(const ParamKey&, const ParamKey&) = default;
};

std::string ToString(const ParamKey& key);

// Chunk rounds implied by NCCL-style chunking when no profiled value exists:
// ring collectives stream one rank's shard (tensor/N), tree and P2P stream the
// whole tensor. Always >= 1.
std::int64_t DefaultEta(CommKind kind, AlgoKind algo, std::int64_t tensor_bytes, int n_devices,
                        std::int64_t chunk_bytes);

enum class Extrapolation { kNone, kClampToEdge };

// Immutable-after-construction store of profiled parameters, keyed by family
// and then by tensor size.
class CommParamDB {
 public:
  using SizeMap = std::map<std::int64_t, CommParams>;

  // Throws DuplicateKeyError when the key holds different parameters already.
  void Insert(const ParamKey& key, const CommParams& params);

  // Exact entry if present; otherwise interpolated between the bracketing
  // sizes: alpha from the lower entry, beta/gamma/delta linear in
  // log2(tensor_bytes), chunk_bytes from the nearer entry, and eta the larger
  // of the nearer entry's eta and the rounds that chunk needs for this size.
  //
  // A family that was not profiled falls back to the family with the same
  // devices-per-node and the largest profiled node count not above the
  // requested one (per-node bandwidth saturates at small scale).
  //
  // Throws ParamLookupError for an unknown family and OutOfRangeError for a
  // size outside the profiled span (unless extrapolation is enabled).
  CommParams Lookup(const ParamKey& key) const;

  // Resolves the family Lookup would use, or nullopt.
  std::optional<ParamFamily> ResolveFamily(const ParamFamily& family) const;

  void set_extrapolation(Extrapolation e) { extrapolation_ = e; }
  Extrapolation extrapolation() const { return extrapolation_; }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const;
  const std::map<ParamFamily, SizeMap>& entries() const { return entries_; }

 private:
  std::map<ParamFamily, SizeMap> entries_;
  Extrapolation extrapolation_ = Extrapolation::kNone;
};

// Execution time of one collective kernel (microseconds). N devices over M
// nodes, K = N/M per node. With M == 1 all transport is intra-server and the
// gamma terms are charged at beta.
//   AllGather/Ring:     a + g*eta*(N-1)
//   ReduceScatter/Ring: a + eta*[b*(N-1) + g*(N-1)] + d*bytes
//   AllReduce/Ring:     a + eta*[b*(N-1) + g*2(N-1)] + d*bytes
//   AllReduce/Tree:     a + g*(eta-1) + 2b*(K-1) + 2g*log2(M) + d*bytes
// Throws UnsupportedCombo for tree AllGather/ReduceScatter and
// InvalidArgument for N < 1, M < 1 or N not divisible by M.
double EstimateCollective(CollectiveKind kind, AlgoKind algo, std::int64_t tensor_bytes, int n,
                          int m, const CommParams& params);

// The same estimate split into its four components.
struct CommBreakdown {
  double setup_us = 0.0;
  double intra_us = 0.0;
  double inter_us = 0.0;
  double reduce_us = 0.0;
  std::int64_t eta = 0;
  // The intra/inter cost of a single chunk round (the part multiplied by eta
  // in the ring formulas; for tree, the one-off intra pass and one inter hop).
  double intra_per_round_us = 0.0;
  double inter_per_round_us = 0.0;

  double total_us() const { return setup_us + intra_us + inter_us + reduce_us; }
};

CommBreakdown BreakdownCollective(CollectiveKind kind, AlgoKind algo, std::int64_t tensor_bytes,
                                  int n, int m, const CommParams& params);

// alpha + eta * (same_node ? beta : gamma), eta = ceil(bytes / chunk_bytes).
double EstimateP2P(std::int64_t tensor_bytes, bool same_node, const CommParams& params);

// Start time of a communication kernel: every communicator in the group must
// have launched, so the last arrival decides. P2P takes exactly two entries.
double SyncStart(std::span<const double> ready_times, CommKind kind);

// Per-component timings for one profiled configuration. The transmission
// components are per chunk round.
struct ComponentTimings {
  double setup_us = 0.0;
  double intra_rt_us = 0.0;
  double inter_rt_us = 0.0;
  double reduce_us = 0.0;
  friend bool operator==(const ComponentTimings&, const ComponentTimings&) = default;
};

struct Measurement {
  ParamKey key;
  ComponentTimings components;
  std::int64_t chunk_bytes = 1;
  std::optional<std::int64_t> eta;  // DefaultEta when absent
};

// Inverts the white-box formulas so each measurement is reproduced at its own
// key. Throws DuplicateKeyError on conflicting measurements for one key.
CommParamDB Calibrate(std::span<const Measurement> measurements);

// Components implied by `params` at `key` (the inverse of Calibrate).
ComponentTimings ComponentsOf(const ParamKey& key, const CommParams& params);

// CSV I/O. Parameter DB header:
//   collective,algorithm,interconnect,n_devices,n_nodes,tensor_bytes,
//   alpha_us,beta_us,gamma_us,delta_us_per_byte,eta,chunk_bytes
// Measurement header:
//   collective,algorithm,interconnect,n_devices,n_nodes,tensor_bytes,
//   chunk_bytes,eta,setup_us,intra_rt_us,inter_rt_us,reduce_us
CommParamDB ParseParamDBCsv(std::string_view text);
CommParamDB LoadParamDB(const std::filesystem::path& path);
std::string SerializeParamDBCsv(const CommParamDB& db);
void SaveParamDB(const CommParamDB& db, const std::filesystem::path& path);

std::vector<Measurement> ParseMeasurementsCsv(std::string_view text);
std::vector<Measurement> LoadMeasurements(const std::filesystem::path& path);

}  // namespace dtsim

#endif  // DTSIM_COMM_MODEL_H_
