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

#include "dtsim/run.h"

#include <chrono>

#include <fmt/format.h>

#include "dtsim/error.h"
#include "json_util.h"

namespace dtsim {

namespace {

using internal::Json;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

bool IsOverridable(const std::string& key) {
  static const char* kTop[] = {"pp", "tp", "dp", "gpus_per_node", "schedule", "model", "world_size"};
  static const char* kModel[] = {"name",    "family",         "num_layers",   "hidden", "heads",
                                 "seq_len", "params_billion", "microbatches", "dtype_bytes"};
  static const char* kKnobs[] = {"buffsize_bytes", "channels", "protocol"};
  for (const char* k : kTop) {
    if (key == k) return true;
  }
  if (key.rfind("model.", 0) == 0) {
    for (const char* k : kModel) {
      if (key.substr(6) == k) return true;
    }
  }
  if (key.rfind("nccl_knobs.", 0) == 0) {
    for (const char* k : kKnobs) {
      if (key.substr(11) == k) return true;
    }
  }
  return false;
}

// Sweep values are JSON scalars when they parse as such, strings otherwise.
Json ScalarValue(const std::string& text) {
  Json v = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded() || v.is_structured()) return Json(text);
  return v;
}

struct Loaded {
  WorkloadSet ws;
  SimOptions options;
  Json echo;
};

Loaded LoadWorkload(const RunSpec& spec, const std::string* config_json) {
  Loaded out;
  out.options.slowdown_passes_max = spec.passes;
  out.options.convergence_tol_us = spec.tol_us;
  if (spec.trace) {
    out.ws = LoadWorkloadSet(*spec.trace);
    out.options.topology.gpus_per_node = spec.gpus_per_node;
    out.echo["trace"] = spec.trace->string();
    out.echo["gpus_per_node"] = spec.gpus_per_node;
  } else {
    const std::filesystem::path base = spec.config->parent_path();
    SimConfig cfg = ParseSimConfig(*config_json, base);
    out.ws = Synthesize(cfg);
    out.options.topology.gpus_per_node = cfg.gpus_per_node;
    out.options.knobs = {cfg.nccl_knobs.protocol, cfg.nccl_knobs.channels};
    out.echo["synthesize"] = internal::ParseJsonText(*config_json, "config");
    out.echo["config"] = spec.config->string();
  }
  return out;
}

Json RankStatsJson(const SimResult& r) {
  Json per_rank = Json::array();
  for (const auto& [rank, s] : r.per_rank) {
    const double util = r.step_time_us > 0.0 ? s.compute_busy_us / r.step_time_us : 0.0;
    per_rank.push_back({{"rank", rank},
                        {"compute_busy_us", s.compute_busy_us},
                        {"comm_busy_us", s.comm_busy_us},
                        {"overlap_us", s.overlap_us},
                        {"idle_us", s.idle_us},
                        {"compute_utilization", util}});
  }
  return per_rank;
}

std::filesystem::path Sibling(const std::filesystem::path& p, const std::string& suffix) {
  std::filesystem::path out = p;
  out.replace_filename(p.stem().string() + suffix + p.extension().string());
  return out;
}

RunReport RunOne(const RunSpec& spec, const std::string* config_json, const CommParamDB& db,
                 const SlowdownModel& model, const std::filesystem::path& report,
                 const std::optional<std::filesystem::path>& chrome, const Json& overrides,
                 Clock::time_point init_begin) {
  Loaded loaded = LoadWorkload(spec, config_json);
  const Clock::time_point exec_begin = Clock::now();
  SimResult result = Simulate(loaded.ws, db, model, loaded.options);
  const Clock::time_point exec_end = Clock::now();

  Json echo = loaded.echo;
  echo["params_db"] = spec.params_db.string();
  echo["slowdown_model"] = spec.slowdown_model ? spec.slowdown_model->string() : "constant:1.0";
  echo["passes"] = spec.passes;
  echo["tol_us"] = spec.tol_us;
  echo["extrapolate"] = spec.extrapolate;
  if (!overrides.empty()) echo["overrides"] = overrides;

  Json doc{{"config", std::move(echo)},
           {"ranks", loaded.ws.ranks.size()},
           {"step_time_us", result.step_time_us},
           {"slowdown_passes", result.iterations_of_slowdown_pass},
           {"converged", result.converged},
           {"adjusted_ops", result.adjusted_ops},
           {"warnings", result.warnings},
           {"per_rank", RankStatsJson(result)}};
  internal::WriteFile(report, doc.dump(2) + "\n");

  Json meta{{"init_seconds", Seconds(init_begin, exec_begin)},
            {"execution_seconds", Seconds(exec_begin, exec_end)}};
  internal::WriteFile(report.string() + ".meta.json", meta.dump(2) + "\n");
  if (chrome) internal::WriteFile(*chrome, ToChromeTrace(result.timeline, loaded.ws));
  return {report, result.step_time_us, result.warnings};
}

}  // namespace

SweepAxis ParseSweepAxis(std::string_view text) {
  const std::size_t eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError(fmt::format("sweep '{}': expected key=a,b,c", text));
  }
  SweepAxis axis;
  axis.key = std::string(text.substr(0, eq));
  std::string_view rest = text.substr(eq + 1);
  while (true) {
    const std::size_t comma = rest.find(',');
    std::string value(rest.substr(0, comma));
    if (value.empty()) throw ConfigError(fmt::format("sweep '{}': empty value", text));
    axis.values.push_back(std::move(value));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (!IsOverridable(axis.key)) {
    throw ConfigError(fmt::format("sweep key '{}' names no config field", axis.key));
  }
  return axis;
}

std::string ApplyOverride(std::string_view config_json, const std::string& key,
                          const std::string& value) {
  if (!IsOverridable(key)) throw ConfigError(fmt::format("'{}' names no config field", key));
  Json doc = internal::ParseJsonText(config_json, "config");
  if (!doc.is_object()) throw ParseError("config: expected an object");
  const std::size_t dot = key.find('.');
  if (dot == std::string::npos) {
    doc[key] = ScalarValue(value);
    return doc.dump();
  }
  const std::string head = key.substr(0, dot);
  Json& parent = doc[head];
  if (parent.is_string()) parent = Json{{"preset", parent.get<std::string>()}};
  if (parent.is_null()) parent = Json::object();
  if (!parent.is_object()) throw ConfigError(fmt::format("'{}' is not an object", head));
  parent[key.substr(dot + 1)] = ScalarValue(value);
  return doc.dump();
}

std::vector<RunReport> Run(const RunSpec& spec) {
  const Clock::time_point init_begin = Clock::now();
  if (spec.trace.has_value() == spec.config.has_value()) {
    throw ConfigError("exactly one of --trace and --config is required");
  }
  if (!spec.sweep.empty() && spec.trace) throw ConfigError("--sweep needs a --config workload");
  if (spec.passes < 0) throw ConfigError("--passes must be >= 0");
  if (!(spec.tol_us >= 0.0)) throw ConfigError("--tol-us must be >= 0");

  std::string config_json;
  if (spec.config) config_json = internal::ReadFile(*spec.config);
  CommParamDB db = LoadParamDB(spec.params_db);
  db.set_extrapolation(spec.extrapolate ? Extrapolation::kClampToEdge : Extrapolation::kNone);
  const SlowdownModel model =
      spec.slowdown_model ? LoadSlowdownModel(*spec.slowdown_model) : SlowdownModel::Constant(1.0);

  if (spec.sweep.empty()) {
    return {RunOne(spec, spec.config ? &config_json : nullptr, db, model, spec.report,
                   spec.chrome_trace, Json::object(), init_begin)};
  }

  // Cartesian product, first axis slowest.
  std::vector<std::size_t> idx(spec.sweep.size(), 0);
  std::vector<RunReport> out;
  Json index = Json::array();
  for (std::size_t run = 0;; ++run) {
    std::string doc = config_json;
    Json overrides = Json::object();
    for (std::size_t a = 0; a < spec.sweep.size(); ++a) {
      const SweepAxis& axis = spec.sweep[a];
      doc = ApplyOverride(doc, axis.key, axis.values[idx[a]]);
      overrides[axis.key] = ScalarValue(axis.values[idx[a]]);
    }
    const std::string suffix = fmt::format(".run{}", run);
    std::optional<std::filesystem::path> chrome;
    if (spec.chrome_trace) chrome = Sibling(*spec.chrome_trace, suffix);
    const Clock::time_point begin = run == 0 ? init_begin : Clock::now();
    RunReport r = RunOne(spec, &doc, db, model, Sibling(spec.report, suffix), chrome, overrides, begin);
    index.push_back({{"overrides", overrides},
                     {"report", r.report.filename().string()},
                     {"step_time_us", r.step_time_us}});
    out.push_back(std::move(r));

    bool done = true;
    for (std::size_t a = spec.sweep.size(); a-- > 0;) {
      if (++idx[a] < spec.sweep[a].values.size()) {
        done = false;
        break;
      }
      idx[a] = 0;
    }
    if (done) break;
  }
  internal::WriteFile(spec.report, Json{{"runs", std::move(index)}}.dump(2) + "\n");
  return out;
}

}  // namespace dtsim
