// Copyright 2026 The powerbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace powerbench {

enum class ErrorCode {
  backend_unavailable,
  out_of_range,
  backend_rejected,
  read_failure,
  device_lost,
  insufficient_data,
  parse_error,
  protocol_error,
  plan_error,
  persist_error,
  undefined_metrics,
  too_few_points,
  invalid_argument,
  config_error,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the harness. The code lets
/// callers (notably the CLI exit-status mapping) branch without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed protocol or table input; offset is the byte position where
/// parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ErrorCode::parse_error, what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace powerbench
