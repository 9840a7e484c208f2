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

#include "dtsim/units.h"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "dtsim/error.h"

namespace dtsim {

std::int64_t ParseByteSize(std::string_view text) {
  auto fail = [&]() -> std::int64_t {
    throw ParseError("malformed byte size '" + std::string(text) + "'");
  };
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  if (text.empty()) return fail();

  std::size_t split = 0;
  while (split < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[split])) ||
          text[split] == '.'))
    ++split;
  if (split == 0) return fail();
  const std::string_view number = text.substr(0, split);
  std::string unit(text.substr(split));
  while (!unit.empty() && std::isspace(static_cast<unsigned char>(unit.front())))
    unit.erase(unit.begin());
  for (char& c : unit) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

  std::int64_t scale = 0;
  if (unit.empty() || unit == "B") {
    scale = 1;
  } else if (unit == "KB" || unit == "KIB" || unit == "K") {
    scale = kKiB;
  } else if (unit == "MB" || unit == "MIB" || unit == "M") {
    scale = kMiB;
  } else if (unit == "GB" || unit == "GIB" || unit == "G") {
    scale = kGiB;
  } else {
    return fail();
  }

  if (number.find('.') == std::string_view::npos) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc() || ptr != number.data() + number.size()) return fail();
    return value * scale;
  }
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(std::string(number), &used);
    if (used != number.size()) return fail();
  } catch (const std::exception&) {
    return fail();
  }
  const double bytes = value * static_cast<double>(scale);
  if (bytes != std::floor(bytes)) return fail();
  return static_cast<std::int64_t>(bytes);
}

}  // namespace dtsim
