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

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "dtsim/error.h"
#include "dtsim/synth.h"
#include "json_util.h"

namespace dtsim {

namespace {

using internal::AsBytes;
using internal::AsInt;
using internal::AsNumber;
using internal::AsString;
using internal::Json;

constexpr std::string_view kCostHeader = "kernel_class,coeff_us_per_element,const_us";

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double CsvNumber(std::string_view s, std::size_t line_no) {
  s = Trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("cost table line {}: '{}' is not a number", line_no, s));
  }
  return v;
}

void CheckCost(const std::string& cls, const CostFn& fn) {
  if (!(fn.coeff_us_per_element >= 0.0) || !(fn.const_us >= 0.0) ||
      !std::isfinite(fn.coeff_us_per_element) || !std::isfinite(fn.const_us)) {
    throw ConfigError(fmt::format("cost for kernel class '{}' must be finite and non-negative", cls));
  }
}

int PositiveInt(const Json& v, std::string_view what) {
  const std::int64_t x = AsInt(v, what);
  if (x < 1 || x > 1 << 30) throw ConfigError(fmt::format("{} must be a positive integer", what));
  return static_cast<int>(x);
}

ModelSpec ParseModel(const Json& j) {
  if (j.is_string()) {
    auto preset = ModelPreset(j.get<std::string>());
    if (!preset) throw ConfigError(fmt::format("unknown model preset '{}'", j.get<std::string>()));
    return *preset;
  }
  if (!j.is_object()) throw ParseError("model: expected a preset name or an object");
  ModelSpec m;
  if (auto it = j.find("preset"); it != j.end()) m = ParseModel(*it);
  for (const auto& [key, v] : j.items()) {
    if (key == "preset") continue;
    const std::string what = "model." + key;
    if (key == "name") {
      m.name = AsString(v, what);
    } else if (key == "family") {
      const std::string f = AsString(v, what);
      if (f == "gpt") {
        m.family = ModelFamily::kGpt;
      } else if (f == "cnn") {
        m.family = ModelFamily::kCnn;
      } else {
        throw ConfigError(fmt::format("unknown model family '{}'", f));
      }
    } else if (key == "num_layers") {
      m.num_layers = PositiveInt(v, what);
    } else if (key == "hidden") {
      m.hidden = PositiveInt(v, what);
    } else if (key == "heads") {
      m.heads = PositiveInt(v, what);
    } else if (key == "seq_len") {
      m.seq_len = PositiveInt(v, what);
    } else if (key == "params_billion") {
      m.params_billion = AsNumber(v, what);
    } else if (key == "microbatches") {
      m.microbatches = PositiveInt(v, what);
    } else if (key == "dtype_bytes") {
      m.dtype_bytes = PositiveInt(v, what);
    } else {
      throw ConfigError(fmt::format("unknown config field '{}'", what));
    }
  }
  return m;
}

KernelMetrics ParseClassMetrics(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  KernelMetrics m;
  const std::pair<const char*, double*> fields[] = {
      {"compute_throughput_pct", &m.compute_throughput_pct},
      {"memory_throughput_pct", &m.memory_throughput_pct},
      {"dram_throughput_pct", &m.dram_throughput_pct},
      {"achieved_occupancy_pct", &m.achieved_occupancy_pct},
      {"l1_hit_rate_pct", &m.l1_hit_rate_pct},
      {"l2_hit_rate_pct", &m.l2_hit_rate_pct},
  };
  for (const auto& [name, dst] : fields) {
    *dst = AsNumber(internal::Field(j, name, where), where + "." + name);
    if (*dst < 0.0 || *dst > 100.0) throw ConfigError(fmt::format("{}.{} out of [0, 100]", where, name));
  }
  return m;
}

}  // namespace

CostTable ParseCostTableCsv(std::string_view text) {
  CostTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!seen_header) {
      if (view != kCostHeader) {
        throw ParseError(fmt::format("cost table line {}: expected header '{}'", line_no, kCostHeader));
      }
      seen_header = true;
      continue;
    }
    const std::size_t c1 = view.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : view.find(',', c1 + 1);
    if (c2 == std::string_view::npos || view.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError(fmt::format("cost table line {}: expected 3 columns", line_no));
    }
    const std::string cls(Trim(view.substr(0, c1)));
    CostFn fn{CsvNumber(view.substr(c1 + 1, c2 - c1 - 1), line_no),
              CsvNumber(view.substr(c2 + 1), line_no)};
    CheckCost(cls, fn);
    if (!table.emplace(cls, fn).second) {
      throw ParseError(fmt::format("cost table line {}: duplicate class '{}'", line_no, cls));
    }
  }
  if (!seen_header) throw ParseError(fmt::format("cost table: missing header '{}'", kCostHeader));
  return table;
}

CostTable LoadCostTable(const std::filesystem::path& path) {
  return ParseCostTableCsv(internal::ReadFile(path));
}

SimConfig ParseSimConfig(std::string_view json_text, const std::filesystem::path& base_dir) {
  const Json root = internal::ParseJsonText(json_text, "config");
  if (!root.is_object()) throw ParseError("config: expected an object");
  SimConfig cfg;
  std::optional<std::int64_t> world_size;
  bool has_model = false;
  for (const auto& [key, v] : root.items()) {
    if (key == "model") {
      cfg.model = ParseModel(v);
      has_model = true;
    } else if (key == "pp") {
      cfg.pp = PositiveInt(v, key);
    } else if (key == "tp") {
      cfg.tp = PositiveInt(v, key);
    } else if (key == "dp") {
      cfg.dp = PositiveInt(v, key);
    } else if (key == "world_size") {
      world_size = AsInt(v, key);
    } else if (key == "gpus_per_node") {
      cfg.gpus_per_node = PositiveInt(v, key);
    } else if (key == "schedule") {
      cfg.schedule = ParseSchedule(AsString(v, key));
    } else if (key == "compute_cost_table") {
      if (v.is_string()) {
        std::filesystem::path p = v.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        cfg.compute_cost_table = LoadCostTable(p);
      } else if (v.is_object()) {
        for (const auto& [cls, c] : v.items()) {
          const std::string where = "compute_cost_table." + cls;
          CostFn fn{AsNumber(internal::Field(c, "coeff_us_per_element", where), where),
                    AsNumber(internal::Field(c, "const_us", where), where)};
          CheckCost(cls, fn);
          cfg.compute_cost_table.emplace(cls, fn);
        }
      } else {
        throw ParseError("compute_cost_table: expected a CSV path or an object");
      }
    } else if (key == "nccl_knobs") {
      if (!v.is_object()) throw ParseError("nccl_knobs: expected an object");
      for (const auto& [k, kv] : v.items()) {
        if (k == "buffsize_bytes") {
          cfg.nccl_knobs.buffsize_bytes = AsBytes(kv, "nccl_knobs.buffsize_bytes");
        } else if (k == "channels") {
          cfg.nccl_knobs.channels = PositiveInt(kv, "nccl_knobs.channels");
        } else if (k == "protocol") {
          cfg.nccl_knobs.protocol = ParseProtocol(AsString(kv, "nccl_knobs.protocol"));
        } else {
          throw ConfigError(fmt::format("unknown config field 'nccl_knobs.{}'", k));
        }
      }
    } else if (key == "kernel_metrics") {
      if (!v.is_object()) throw ParseError("kernel_metrics: expected an object");
      for (const auto& [cls, m] : v.items()) {
        cfg.kernel_metrics[cls] = ParseClassMetrics(m, "kernel_metrics." + cls);
      }
    } else {
      throw ConfigError(fmt::format("unknown config field '{}'", key));
    }
  }
  if (!has_model) throw ConfigError("config: missing field 'model'");
  if (world_size && *world_size != cfg.world_size()) {
    throw ConfigError(fmt::format("world_size {} != pp*tp*dp = {}", *world_size, cfg.world_size()));
  }
  CheckConfig(cfg);
  return cfg;
}

SimConfig LoadSimConfig(const std::filesystem::path& path) {
  return ParseSimConfig(internal::ReadFile(path), path.parent_path());
}

}  // namespace dtsim
