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

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dtsim/comm_model.h"
#include "dtsim/error.h"
#include "dtsim/run.h"
#include "dtsim/synth.h"
#include "dtsim/workload.h"

namespace {

void ConfigureLogging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DTSIM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; keep the default for those.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
  spdlog::set_pattern("[%l] %v");
}

int ReportError(std::string_view cls, std::string_view message, int code) {
  std::string flat(message);
  for (char& c : flat) {
    if (c == '\n') c = ' ';
  }
  std::cerr << fmt::format("error: class={} message={}\n", cls, flat);
  return code;
}

int ValidateTrace(const std::string& path) {
  const dtsim::WorkloadSet ws = dtsim::LoadWorkloadSetUnchecked(path);
  const std::vector<dtsim::Violation> violations = dtsim::Validate(ws);
  for (const dtsim::Violation& v : violations) std::cout << dtsim::ToString(v) << "\n";
  if (!violations.empty()) {
    return ReportError("ValidationError", fmt::format("{} violation(s)", violations.size()),
                       static_cast<int>(dtsim::ExitCode::kValidation));
  }
  std::size_t ops = 0;
  for (const auto& [rank, rw] : ws.ranks) ops += rw.ops.size();
  std::cout << fmt::format("ok: {} ranks, {} ops\n", ws.ranks.size(), ops);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ConfigureLogging();
  CLI::App app{"dtsim: distributed training step-time simulator"};
  app.require_subcommand(1);

  dtsim::RunSpec spec;
  std::string trace, config, slowdown, chrome;
  std::vector<std::string> sweeps;
  CLI::App* simulate = app.add_subcommand("simulate", "simulate one step and write a report");
  simulate->add_option("--trace", trace, "workload trace (JSON)");
  simulate->add_option("--config", config, "synthesis config (JSON)");
  simulate->add_option("--params", spec.params_db, "communication parameter database (CSV)")
      ->required();
  simulate->add_option("--slowdown-model", slowdown, "slowdown model (JSON)");
  simulate->add_option("--report", spec.report, "report path (JSON)")->required();
  simulate->add_option("--chrome-trace", chrome, "Chrome trace output path");
  simulate->add_option("--sweep", sweeps, "config override axis key=a,b,c (repeatable)");
  simulate->add_option("--passes", spec.passes, "slowdown pass limit")->capture_default_str();
  simulate->add_option("--tol-us", spec.tol_us, "slowdown convergence tolerance (us)")
      ->capture_default_str();
  simulate->add_option("--gpus-per-node", spec.gpus_per_node, "GPUs per node for trace inputs")
      ->capture_default_str();
  simulate->add_flag("--extrapolate", spec.extrapolate,
                     "clamp parameter lookups outside the profiled sizes");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate-trace", "check a workload trace");
  validate->add_option("trace", validate_path, "workload trace (JSON)")->required();

  std::string measurements, params_out;
  CLI::App* calibrate = app.add_subcommand("calibrate", "fit parameters from component timings");
  calibrate->add_option("--measurements", measurements, "measurement CSV")->required();
  calibrate->add_option("--out", params_out, "parameter database output (CSV)")->required();

  std::string synth_config, synth_out;
  CLI::App* synth = app.add_subcommand("synth", "write a synthesized trace without simulating");
  synth->add_option("--config", synth_config, "synthesis config (JSON)")->required();
  synth->add_option("--out", synth_out, "trace output path (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError("UsageError", e.what(), static_cast<int>(dtsim::ExitCode::kValidation));
  }

  try {
    if (*simulate) {
      if (!trace.empty()) spec.trace = trace;
      if (!config.empty()) spec.config = config;
      if (!slowdown.empty()) spec.slowdown_model = slowdown;
      if (!chrome.empty()) spec.chrome_trace = chrome;
      for (const std::string& s : sweeps) spec.sweep.push_back(dtsim::ParseSweepAxis(s));
      spdlog::info("params {}, {} sweep axes", spec.params_db.string(), spec.sweep.size());
      for (const dtsim::RunReport& r : dtsim::Run(spec)) {
        for (const std::string& w : r.warnings) spdlog::warn("{}: {}", r.report.string(), w);
        std::cout << fmt::format("{}: step_time_us={}\n", r.report.string(), r.step_time_us);
      }
    } else if (*validate) {
      return ValidateTrace(validate_path);
    } else if (*calibrate) {
      const auto rows = dtsim::LoadMeasurements(measurements);
      const dtsim::CommParamDB db = dtsim::Calibrate(rows);
      dtsim::SaveParamDB(db, params_out);
      spdlog::info("calibrated {} entries from {} measurements", db.size(), rows.size());
    } else if (*synth) {
      const dtsim::SimConfig cfg = dtsim::LoadSimConfig(synth_config);
      dtsim::SaveWorkloadSet(dtsim::Synthesize(cfg), synth_out);
      spdlog::info("wrote {} ranks to {}", cfg.world_size(), synth_out);
    }
  } catch (const dtsim::Error& e) {
    return ReportError(e.error_class(), e.what(), static_cast<int>(e.exit_code()));
  } catch (const std::exception& e) {
    return ReportError("Error", e.what(), static_cast<int>(dtsim::ExitCode::kGeneric));
  }
  return 0;
}
