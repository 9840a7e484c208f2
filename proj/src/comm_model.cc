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

#include "dtsim/comm_model.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dtsim/error.h"
#include "dtsim/units.h"

namespace dtsim {

std::string_view ToString(CommKind kind) {
  switch (kind) {
    case CommKind::kAllReduce:
      return "AllReduce";
    case CommKind::kAllGather:
      return "AllGather";
    case CommKind::kReduceScatter:
      return "ReduceScatter";
    case CommKind::kP2P:
      return "P2P";
  }
  return "?";
}

std::string_view ToString(Interconnect ic) {
  switch (ic) {
    case Interconnect::kNVLink:
      return "NVLink";
    case Interconnect::kIB:
      return "IB";
    case Interconnect::kTCP:
      return "TCP";
  }
  return "?";
}

CommKind ParseCommKind(std::string_view s) {
  if (s == "P2P") return CommKind::kP2P;
  return ToCommKind(ParseCollectiveKind(s));
}

Interconnect ParseInterconnect(std::string_view s) {
  if (s == "NVLink") return Interconnect::kNVLink;
  if (s == "IB") return Interconnect::kIB;
  if (s == "TCP") return Interconnect::kTCP;
  throw ParseError(fmt::format("unknown interconnect '{}'", s));
}

CommKind ToCommKind(CollectiveKind kind) {
  switch (kind) {
    case CollectiveKind::kAllReduce:
      return CommKind::kAllReduce;
    case CollectiveKind::kAllGather:
      return CommKind::kAllGather;
    case CollectiveKind::kReduceScatter:
      return CommKind::kReduceScatter;
  }
  return CommKind::kAllReduce;
}

std::string ToString(const ParamKey& key) {
  return fmt::format("{}/{} {} N={} M={} {}B", ToString(key.collective), ToString(key.algorithm),
                     ToString(key.interconnect), key.n_devices, key.n_nodes, key.tensor_bytes);
}

std::int64_t DefaultEta(CommKind kind, AlgoKind algo, std::int64_t tensor_bytes, int n_devices,
                        std::int64_t chunk_bytes) {
  if (chunk_bytes <= 0) throw InvalidArgument("chunk_bytes must be positive");
  std::int64_t stream = tensor_bytes;
  if (kind != CommKind::kP2P && algo == AlgoKind::kRing && n_devices > 0) {
    stream = CeilDiv(tensor_bytes, n_devices);
  }
  return std::max<std::int64_t>(1, CeilDiv(stream, chunk_bytes));
}

// ---------------------------------------------------------------------------
// Parameter database.

void CommParamDB::Insert(const ParamKey& key, const CommParams& params) {
  SizeMap& sizes = entries_[key.family()];
  auto [it, inserted] = sizes.emplace(key.tensor_bytes, params);
  if (!inserted && !(it->second == params)) {
    throw DuplicateKeyError(fmt::format("conflicting parameters for {}", ToString(key)));
  }
}

std::size_t CommParamDB::size() const {
  std::size_t n = 0;
  for (const auto& [family, sizes] : entries_) n += sizes.size();
  return n;
}

std::optional<ParamFamily> CommParamDB::ResolveFamily(const ParamFamily& family) const {
  if (entries_.contains(family)) return family;
  if (family.n_nodes <= 1 || family.n_devices % family.n_nodes != 0) return std::nullopt;
  const int per_node = family.n_devices / family.n_nodes;
  std::optional<ParamFamily> best;
  for (const auto& [f, sizes] : entries_) {
    if (f.collective != family.collective || f.algorithm != family.algorithm ||
        f.interconnect != family.interconnect || f.n_nodes < 2 || f.n_nodes > family.n_nodes ||
        f.n_devices != f.n_nodes * per_node) {
      continue;
    }
    if (!best || f.n_nodes > best->n_nodes) best = f;
  }
  return best;
}

CommParams CommParamDB::Lookup(const ParamKey& key) const {
  const std::optional<ParamFamily> family = ResolveFamily(key.family());
  if (!family) {
    throw ParamLookupError(fmt::format("no profiled parameters for {}", ToString(key)));
  }
  const SizeMap& sizes = entries_.at(*family);
  const std::int64_t bytes = key.tensor_bytes;

  auto exact = sizes.find(bytes);
  if (exact != sizes.end()) return exact->second;

  auto hi = sizes.upper_bound(bytes);
  if (hi == sizes.begin() || hi == sizes.end()) {
    if (extrapolation_ == Extrapolation::kNone || sizes.empty()) {
      throw OutOfRangeError(fmt::format("{} outside profiled span [{}, {}] bytes", ToString(key),
                                        sizes.begin()->first, sizes.rbegin()->first));
    }
    const CommParams& edge = hi == sizes.end() ? sizes.rbegin()->second : sizes.begin()->second;
    CommParams p = edge;
    p.eta = DefaultEta(key.collective, key.algorithm, bytes, key.n_devices, edge.chunk_bytes);
    return p;
  }
  auto lo = std::prev(hi);
  const CommParams& a = lo->second;
  const CommParams& b = hi->second;
  const double log_lo = std::log2(static_cast<double>(lo->first));
  const double log_hi = std::log2(static_cast<double>(hi->first));
  const double log_x = std::log2(static_cast<double>(bytes));
  const double t = (log_x - log_lo) / (log_hi - log_lo);
  auto lerp = [t](double x, double y) { return x + t * (y - x); };

  CommParams p;
  p.alpha_us = a.alpha_us;
  p.beta_us = lerp(a.beta_us, b.beta_us);
  p.gamma_us = lerp(a.gamma_us, b.gamma_us);
  p.delta_us_per_byte = lerp(a.delta_us_per_byte, b.delta_us_per_byte);
  const CommParams& nearer = (log_x - log_lo) <= (log_hi - log_x) ? a : b;
  p.chunk_bytes = nearer.chunk_bytes;
  p.eta = std::max(nearer.eta, DefaultEta(key.collective, key.algorithm, bytes, key.n_devices,
                                          nearer.chunk_bytes));
  return p;
}

// ---------------------------------------------------------------------------
// White-box estimators.

namespace {

void CheckShape(int n, int m) {
  if (n < 1 || m < 1 || n % m != 0) {
    throw InvalidArgument(fmt::format("invalid group shape N={} M={}", n, m));
  }
}

}  // namespace

double EstimateCollective(CollectiveKind kind, AlgoKind algo, std::int64_t tensor_bytes, int n,
                          int m, const CommParams& params) {
  CheckShape(n, m);
  if (!IsSupported(kind, algo)) {
    throw UnsupportedCombo(fmt::format("{} has no {} implementation", ToString(kind), ToString(algo)));
  }
  const double a = params.alpha_us;
  const double b = params.beta_us;
  const double g = m == 1 ? params.beta_us : params.gamma_us;
  const double d = params.delta_us_per_byte;
  const double eta = static_cast<double>(params.eta);
  const double hops = static_cast<double>(n - 1);
  const double size = static_cast<double>(tensor_bytes);

  if (algo == AlgoKind::kTree) {
    const double k = static_cast<double>(n / m);
    return a + g * (eta - 1.0) + 2.0 * b * (k - 1.0) + 2.0 * g * std::log2(static_cast<double>(m)) +
           d * size;
  }
  switch (kind) {
    case CollectiveKind::kAllGather:
      return a + g * eta * hops;
    case CollectiveKind::kReduceScatter:
      return a + eta * (b * hops + g * hops) + d * size;
    case CollectiveKind::kAllReduce:
      return a + eta * (b * hops + g * 2.0 * hops) + d * size;
  }
  return a;
}

CommBreakdown BreakdownCollective(CollectiveKind kind, AlgoKind algo, std::int64_t tensor_bytes,
                                  int n, int m, const CommParams& params) {
  CheckShape(n, m);
  if (!IsSupported(kind, algo)) {
    throw UnsupportedCombo(fmt::format("{} has no {} implementation", ToString(kind), ToString(algo)));
  }
  const double b = params.beta_us;
  const double g = m == 1 ? params.beta_us : params.gamma_us;
  const double eta = static_cast<double>(params.eta);
  const double hops = static_cast<double>(n - 1);

  CommBreakdown out;
  out.setup_us = params.alpha_us;
  out.eta = params.eta;
  if (algo == AlgoKind::kTree) {
    const double k = static_cast<double>(n / m);
    out.intra_per_round_us = 2.0 * b * (k - 1.0);
    out.inter_per_round_us = g;
    out.intra_us = out.intra_per_round_us;
    out.inter_us = g * (eta - 1.0) + 2.0 * g * std::log2(static_cast<double>(m));
    out.reduce_us = params.delta_us_per_byte * static_cast<double>(tensor_bytes);
    return out;
  }
  switch (kind) {
    case CollectiveKind::kAllGather:
      out.inter_per_round_us = g * hops;
      break;
    case CollectiveKind::kReduceScatter:
      out.intra_per_round_us = b * hops;
      out.inter_per_round_us = g * hops;
      out.reduce_us = params.delta_us_per_byte * static_cast<double>(tensor_bytes);
      break;
    case CollectiveKind::kAllReduce:
      out.intra_per_round_us = b * hops;
      out.inter_per_round_us = g * 2.0 * hops;
      out.reduce_us = params.delta_us_per_byte * static_cast<double>(tensor_bytes);
      break;
  }
  out.intra_us = eta * out.intra_per_round_us;
  out.inter_us = eta * out.inter_per_round_us;
  return out;
}

double EstimateP2P(std::int64_t tensor_bytes, bool same_node, const CommParams& params) {
  if (tensor_bytes <= 0) throw InvalidArgument("p2p tensor_bytes must be positive");
  const std::int64_t eta =
      DefaultEta(CommKind::kP2P, AlgoKind::kRing, tensor_bytes, 2, params.chunk_bytes);
  return params.alpha_us +
         static_cast<double>(eta) * (same_node ? params.beta_us : params.gamma_us);
}

double SyncStart(std::span<const double> ready_times, CommKind kind) {
  if (ready_times.empty()) throw InvalidArgument("sync_start needs at least one ready time");
  if (kind == CommKind::kP2P && ready_times.size() != 2) {
    throw InvalidArgument("p2p sync_start needs exactly two ready times");
  }
  return *std::max_element(ready_times.begin(), ready_times.end());
}

// ---------------------------------------------------------------------------
// Calibration.

namespace {

// Divides a measured component by the coefficient its parameter carries in the
// model; a zero coefficient admits only a zero measurement.
double Invert(double measured, double coefficient, const ParamKey& key, std::string_view what) {
  if (coefficient == 0.0) {
    if (measured != 0.0) {
      throw InvalidArgument(fmt::format("{}: {} must be 0 for this shape", ToString(key), what));
    }
    return 0.0;
  }
  return measured / coefficient;
}

struct Coefficients {
  double intra = 0.0;   // intra_rt = beta * intra
  double inter = 0.0;   // inter_rt = gamma * inter
  bool reduces = false;
};

Coefficients CoefficientsFor(const ParamKey& key) {
  const double hops = static_cast<double>(key.n_devices - 1);
  Coefficients c;
  switch (key.collective) {
    case CommKind::kP2P:
      c = {1.0, 1.0, false};
      break;
    case CommKind::kAllGather:
      c = {hops, hops, false};
      break;
    case CommKind::kReduceScatter:
      c = {hops, hops, true};
      break;
    case CommKind::kAllReduce:
      if (key.algorithm == AlgoKind::kTree) {
        const double k = static_cast<double>(key.n_devices / key.n_nodes);
        c = {2.0 * (k - 1.0), 1.0, true};
      } else {
        c = {hops, 2.0 * hops, true};
      }
      break;
  }
  return c;
}

}  // namespace

CommParamDB Calibrate(std::span<const Measurement> measurements) {
  CommParamDB db;
  for (const Measurement& m : measurements) {
    const ParamKey& key = m.key;
    CheckShape(key.n_devices, key.n_nodes);
    if (key.collective != CommKind::kP2P) {
      const CollectiveKind ck = key.collective == CommKind::kAllReduce       ? CollectiveKind::kAllReduce
                                : key.collective == CommKind::kAllGather     ? CollectiveKind::kAllGather
                                                                             : CollectiveKind::kReduceScatter;
      if (!IsSupported(ck, key.algorithm)) {
        throw UnsupportedCombo(fmt::format("cannot calibrate {}", ToString(key)));
      }
    }
    if (key.tensor_bytes <= 0 || m.chunk_bytes <= 0) {
      throw InvalidArgument(fmt::format("{}: sizes must be positive", ToString(key)));
    }
    const Coefficients c = CoefficientsFor(key);
    CommParams p;
    p.alpha_us = m.components.setup_us;
    p.beta_us = Invert(m.components.intra_rt_us, c.intra, key, "intra_rt_us");
    p.gamma_us = Invert(m.components.inter_rt_us, c.inter, key, "inter_rt_us");
    p.delta_us_per_byte =
        Invert(m.components.reduce_us, c.reduces ? static_cast<double>(key.tensor_bytes) : 0.0, key,
               "reduce_us");
    p.chunk_bytes = m.chunk_bytes;
    p.eta = m.eta ? *m.eta
                  : DefaultEta(key.collective, key.algorithm, key.tensor_bytes, key.n_devices,
                               m.chunk_bytes);
    if (p.eta < 1) throw InvalidArgument(fmt::format("{}: eta must be >= 1", ToString(key)));
    db.Insert(key, p);
  }
  return db;
}

ComponentTimings ComponentsOf(const ParamKey& key, const CommParams& params) {
  const Coefficients c = CoefficientsFor(key);
  ComponentTimings t;
  t.setup_us = params.alpha_us;
  t.intra_rt_us = params.beta_us * c.intra;
  t.inter_rt_us = params.gamma_us * c.inter;
  t.reduce_us = c.reduces ? params.delta_us_per_byte * static_cast<double>(key.tensor_bytes) : 0.0;
  return t;
}

}  // namespace dtsim
