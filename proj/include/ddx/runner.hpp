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
#ifndef DDXFLOW_RUNNER_HPP
#define DDXFLOW_RUNNER_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "ddx/run_config.hpp"

namespace ddx::run {

struct CaseOutcome {
  std::string case_id;
  bool completed = false;
  std::string error;
  std::string trace_file;
};

struct RunSummary {
  std::filesystem::path output_dir;
  std::filesystem::path manifest_path;
  std::vector<CaseOutcome> outcomes;

  int completed_count() const;
};

/// Executes the configured experiment: loads and samples the dataset, wires
/// backends and agents per case, runs the driver loop, and writes one trace
/// file per case plus a run manifest. Per-case failures are reported in the
/// summary, not thrown.
RunSummary run_experiment(const RunConfig& config);

}  // namespace ddx::run

#endif  // DDXFLOW_RUNNER_HPP
