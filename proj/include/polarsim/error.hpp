/*
 * Copyright (C) 2026 The polarsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace polarsim {

enum class ErrorCode {
  NonPositiveParameter,
  SimplexViolation,
  OutOfRange,
  BaselineSupercritical,
  RegimeError,
  FormulaInapplicable,
  BelowThreshold,
  StepSizeUnderflow,
  BoundaryPoint,
  RegimeMismatch,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::SimplexViolation: return "SimplexViolation";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BaselineSupercritical: return "BaselineSupercritical";
    case ErrorCode::RegimeError: return "RegimeError";
    case ErrorCode::FormulaInapplicable: return "FormulaInapplicable";
    case ErrorCode::BelowThreshold: return "BelowThreshold";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::BoundaryPoint: return "BoundaryPoint";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` distinguishes the cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace polarsim
