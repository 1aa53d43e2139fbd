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

#include <stdexcept>
#include <string>

namespace lingmem {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kDuplicate,
  kNotFound,
  kEmpty,
  kMalformed,
  kCorruption,
  kIo,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kEmpty: return "empty";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kCorruption: return "corruption";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported with this exception; the code lets
// callers (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lingmem
