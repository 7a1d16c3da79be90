/*
 * Copyright 2025 The ddxflow Authors.
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
#ifndef DDXFLOW_ERRORS_HPP
#define DDXFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddx {

enum class ErrorCode {
  InvalidArgument,
  InvalidName,
  ParseFailure,
  ConfigError,
  TransportError,
  DegenerateVector,
  SimulatorError,
  RetrievalError,
  StrategyError,
  StrategyEmptyAfterFilter,
  CaseFailure,
  IngestError,
  SchemaDrift,
  MetricsError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a typed error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ddx

#endif  // DDXFLOW_ERRORS_HPP
