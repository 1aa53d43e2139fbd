// Copyright 2026 The lingmem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Canonical text form shared by every record, report and config file:
// object keys sorted bytewise, no insignificant whitespace, floating point
// values printed with at most 9 significant digits, UTF-8 passed through.

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

#include "lingmem/errors.hpp"

namespace lingmem {

using Json = nlohmann::json;

namespace detail {

inline void format_float(double v, std::string& out) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

inline void canonical_append(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      // nlohmann::json objects are std::map backed, so iteration is sorted.
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(it.key()).dump(-1, ' ', false, Json::error_handler_t::strict);
        out.push_back(':');
        canonical_append(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& v : j) {
        if (!first) out.push_back(',');
        first = false;
        canonical_append(v, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float:
      format_float(j.get<double>(), out);
      break;
    default:
      out += j.dump(-1, ' ', false, Json::error_handler_t::strict);
      break;
  }
}

}  // namespace detail

inline std::string canonical_dump(const Json& j) {
  std::string out;
  detail::canonical_append(j, out);
  return out;
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kMalformed, where + ": " + e.what());
  }
}

}  // namespace lingmem
