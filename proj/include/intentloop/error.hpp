// Copyright 2026 The intentloop Authors
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
#include <utility>

#include "json.hpp"

namespace intentloop {

/// Error codes surfaced by the library. The string form is part of the
/// service's JSON error contract.
enum class ErrorCode {
  EmptyPrompt,
  PromptTooLong,
  UnknownCategory,
  UnknownAttribute,
  GrammarError,
  InvalidSpec,
  RuleConflict,
  UnsatisfiableConstraints,
  TooManyInstances,
  InvalidTarget,
  InvariantViolation,
  InvalidUpdate,
  InvalidConfig,
  CalibrationFailed,
  UnsupportedFormat,
  NotFound,
  Conflict,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPrompt: return "EmptyPrompt";
    case ErrorCode::PromptTooLong: return "PromptTooLong";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::GrammarError: return "GrammarError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::RuleConflict: return "RuleConflict";
    case ErrorCode::UnsatisfiableConstraints: return "UnsatisfiableConstraints";
    case ErrorCode::TooManyInstances: return "TooManyInstances";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidUpdate: return "InvalidUpdate";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  /// {code, message, detail?}
  nlohmann::json to_json() const {
    nlohmann::json j{{"code", to_string(code_)}, {"message", what()}};
    if (!detail_.is_null()) j["detail"] = detail_;
    return j;
  }

private:
  ErrorCode code_;
  nlohmann::json detail_;
};

/// Prompt errors carry the offending token index (or -1 when not tied to a
/// token, e.g. an empty prompt).
class ParseError : public Error {
public:
  ParseError(ErrorCode code, const std::string& message, int position, std::string token = {})
      : Error(code, message, nlohmann::json{{"position", position}, {"token", token}}),
        position_(position) {}

  int position() const noexcept { return position_; }

private:
  int position_;
};

}  // namespace intentloop
