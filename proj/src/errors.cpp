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
#include "ddx/errors.hpp"

namespace ddx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::SimulatorError: return "SimulatorError";
    case ErrorCode::RetrievalError: return "RetrievalError";
    case ErrorCode::StrategyError: return "StrategyError";
    case ErrorCode::StrategyEmptyAfterFilter: return "StrategyError(EmptyAfterFilter)";
    case ErrorCode::CaseFailure: return "CaseFailure";
    case ErrorCode::IngestError: return "IngestError";
    case ErrorCode::SchemaDrift: return "IngestError(SchemaDrift)";
    case ErrorCode::MetricsError: return "MetricsError";
  }
  return "UnknownError";
}

}  // namespace ddx
