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

#ifndef DTSIM_RUN_H_
#define DTSIM_RUN_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtsim/engine.h"
#include "dtsim/synth.h"

namespace dtsim {

// One `--sweep key=a,b,c` axis. Keys name SimConfig fields: pp, tp, dp,
// gpus_per_node, schedule, model, model.<field>, nccl_knobs.<field>.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

// Parses "key=a,b,c". Throws ConfigError.
SweepAxis ParseSweepAxis(std::string_view text);

struct RunSpec {
  // Exactly one workload source.
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> config;
  std::filesystem::path params_db;
  std::optional<std::filesystem::path> slowdown_model;  // constant 1.0 when absent
  std::filesystem::path report;
  std::optional<std::filesystem::path> chrome_trace;
  std::vector<SweepAxis> sweep;

  int passes = 3;
  double tol_us = 1.0;
  int gpus_per_node = 8;  // trace inputs only; configs carry their own
  bool extrapolate = false;
};

struct RunReport {
  std::filesystem::path report;
  double step_time_us = 0.0;
  std::vector<std::string> warnings;
};

// Applies one override to a config document (a JSON object). Throws
// ConfigError for keys that name no SimConfig field.
std::string ApplyOverride(std::string_view config_json, const std::string& key,
                          const std::string& value);

// Simulates and writes the report (plus `<report>.meta.json` with wall-clock
// timings and an optional Chrome trace). A sweep writes one report per point
// (`<stem>.run<i><ext>`) and an index at `report`. Throws the module errors.
std::vector<RunReport> Run(const RunSpec& spec);

}  // namespace dtsim

#endif  // DTSIM_RUN_H_
