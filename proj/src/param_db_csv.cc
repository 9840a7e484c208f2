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
#include <sstream>

#include <fmt/format.h>

#include "dtsim/comm_model.h"
#include "dtsim/error.h"
#include "dtsim/units.h"
#include "json_util.h"

namespace dtsim {

namespace {

constexpr std::string_view kDbHeader =
    "collective,algorithm,interconnect,n_devices,n_nodes,tensor_bytes,alpha_us,beta_us,gamma_us,"
    "delta_us_per_byte,eta,chunk_bytes";
constexpr std::string_view kMeasurementHeader =
    "collective,algorithm,interconnect,n_devices,n_nodes,tensor_bytes,chunk_bytes,eta,setup_us,"
    "intra_rt_us,inter_rt_us,reduce_us";

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitCsv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double ToDouble(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, s));
  }
  return v;
}

std::int64_t ToInt(std::string_view s, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("line {}: '{}' is not an integer", line_no, s));
  }
  return v;
}

// Calls `row(fields, line_no)` for every data line after checking the header.
template <typename RowFn>
void ForEachRow(std::string_view text, std::string_view header, RowFn&& row) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  const std::size_t columns = SplitCsv(header).size();
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!seen_header) {
      if (view != header) {
        throw ParseError(fmt::format("line {}: expected header '{}'", line_no, header));
      }
      seen_header = true;
      continue;
    }
    std::vector<std::string_view> fields = SplitCsv(view);
    if (fields.size() != columns) {
      throw ParseError(fmt::format("line {}: expected {} columns, got {}", line_no, columns,
                                   fields.size()));
    }
    row(fields, line_no);
  }
  if (!seen_header) throw ParseError(fmt::format("missing header '{}'", header));
}

ParamKey KeyFromFields(const std::vector<std::string_view>& f, std::size_t line_no) {
  ParamKey key;
  key.collective = ParseCommKind(f[0]);
  key.algorithm = ParseAlgoKind(f[1]);
  key.interconnect = ParseInterconnect(f[2]);
  key.n_devices = static_cast<int>(ToInt(f[3], line_no));
  key.n_nodes = static_cast<int>(ToInt(f[4], line_no));
  key.tensor_bytes = ParseByteSize(f[5]);
  if (key.n_nodes < 1 || key.n_devices < key.n_nodes || key.n_devices % key.n_nodes != 0) {
    throw ParseError(fmt::format("line {}: invalid n_devices/n_nodes {}/{}", line_no, key.n_devices,
                                 key.n_nodes));
  }
  return key;
}

}  // namespace

CommParamDB ParseParamDBCsv(std::string_view text) {
  CommParamDB db;
  ForEachRow(text, kDbHeader, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    const ParamKey key = KeyFromFields(f, line_no);
    CommParams p;
    p.alpha_us = ToDouble(f[6], line_no);
    p.beta_us = ToDouble(f[7], line_no);
    p.gamma_us = ToDouble(f[8], line_no);
    p.delta_us_per_byte = ToDouble(f[9], line_no);
    p.eta = ToInt(f[10], line_no);
    p.chunk_bytes = ParseByteSize(f[11]);
    if (p.alpha_us < 0 || p.beta_us < 0 || p.gamma_us < 0 || p.delta_us_per_byte < 0 || p.eta < 1 ||
        p.chunk_bytes < 1) {
      throw ParseError(fmt::format("line {}: parameters out of range", line_no));
    }
    db.Insert(key, p);
  });
  return db;
}

CommParamDB LoadParamDB(const std::filesystem::path& path) {
  std::string text;
  try {
    text = internal::ReadFile(path);
  } catch (const IoError& e) {
    throw ParamLookupError(fmt::format("parameter database unavailable: {}", e.what()));
  }
  return ParseParamDBCsv(text);
}

std::string SerializeParamDBCsv(const CommParamDB& db) {
  std::string out(kDbHeader);
  out += '\n';
  for (const auto& [family, sizes] : db.entries()) {
    for (const auto& [bytes, p] : sizes) {
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", ToString(family.collective),
                         ToString(family.algorithm), ToString(family.interconnect),
                         family.n_devices, family.n_nodes, bytes, p.alpha_us, p.beta_us, p.gamma_us,
                         p.delta_us_per_byte, p.eta, p.chunk_bytes);
    }
  }
  return out;
}

void SaveParamDB(const CommParamDB& db, const std::filesystem::path& path) {
  internal::WriteFile(path, SerializeParamDBCsv(db));
}

std::vector<Measurement> ParseMeasurementsCsv(std::string_view text) {
  std::vector<Measurement> out;
  ForEachRow(text, kMeasurementHeader,
             [&](const std::vector<std::string_view>& f, std::size_t line_no) {
               Measurement m;
               m.key = KeyFromFields(f, line_no);
               m.chunk_bytes = ParseByteSize(f[6]);
               if (!f[7].empty()) m.eta = ToInt(f[7], line_no);
               m.components.setup_us = ToDouble(f[8], line_no);
               m.components.intra_rt_us = ToDouble(f[9], line_no);
               m.components.inter_rt_us = ToDouble(f[10], line_no);
               m.components.reduce_us = ToDouble(f[11], line_no);
               out.push_back(m);
             });
  return out;
}

std::vector<Measurement> LoadMeasurements(const std::filesystem::path& path) {
  return ParseMeasurementsCsv(internal::ReadFile(path));
}

}  // namespace dtsim
