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

#ifndef DTSIM_SRC_JSON_UTIL_H_
#define DTSIM_SRC_JSON_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "dtsim/error.h"
#include "dtsim/units.h"

namespace dtsim::internal {

using Json = nlohmann::json;

inline const Json& Field(const Json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw ParseError(fmt::format("{}: expected an object", where));
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(fmt::format("{}: missing field '{}'", where, key));
  return *it;
}

inline std::int64_t AsInt(const Json& v, std::string_view what) {
  if (!v.is_number_integer()) throw ParseError(fmt::format("{}: expected an integer", what));
  return v.get<std::int64_t>();
}

inline double AsNumber(const Json& v, std::string_view what) {
  if (!v.is_number()) throw ParseError(fmt::format("{}: expected a number", what));
  return v.get<double>();
}

inline std::string AsString(const Json& v, std::string_view what) {
  if (!v.is_string()) throw ParseError(fmt::format("{}: expected a string", what));
  return v.get<std::string>();
}

// Integer byte count or a "4MB"-style string.
inline std::int64_t AsBytes(const Json& v, std::string_view what) {
  if (v.is_string()) return ParseByteSize(v.get<std::string>());
  return AsInt(v, what);
}

inline Json ParseJsonText(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(fmt::format("{}: {}", what, e.what()));
  }
}

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace dtsim::internal

#endif  // DTSIM_SRC_JSON_UTIL_H_
