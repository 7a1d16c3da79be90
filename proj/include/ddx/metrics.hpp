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
#ifndef DDXFLOW_METRICS_HPP
#define DDXFLOW_METRICS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddx/core_model.hpp"

namespace ddx::metrics {

/// Ranks live in [1, kRankCap]; a truth absent from the top-10 scores the cap.
inline constexpr int kRankCap = 11;

/// Ground-truth ranks across iterations for one case, each in [1, 11].
struct RankTrajectory {
  std::string case_id;
  std::vector<int> ranks;
};

struct CaseResult {
  std::string case_id;
  int final_rank = kRankCap;
  RankTrajectory trajectory;
  bool flagged_no_diagnosis = false;
  double wall_time = 0.0;  // last event time, passed through from the trace
};

struct RunReport {
  std::size_t case_count = 0;
  std::map<int, double> gtpa;  // k -> accuracy
  double avg_rank = 0.0;
  double delta_progress = 0.0;
  std::vector<CaseResult> per_case;
};

/// 1-based position of truth among the first 10 entries (normalized match);
/// kRankCap when absent.
int rank_of_truth(const RankedDifferential& ddx, const std::string& truth);

/// Fraction of cases whose final rank is <= k. Throws Error(MetricsError)
/// on empty input, Error(InvalidArgument) on k < 1.
double gtpa_at_k(const std::vector<int>& final_ranks, int k);

/// Arithmetic mean of final ranks (already capped).
double avg_rank(const std::vector<int>& final_ranks);

/// Per-case mean of consecutive rank improvements r_t - r_{t+1}, averaged
/// over all cases. Single-iteration cases contribute 0.
double delta_progress(const std::vector<RankTrajectory>& trajectories);

/// Rebuilds trajectories from the strategy observations of every
/// *.trace.jsonl under trace_dir and computes all metrics. A case without
/// any diagnosis event counts as rank 11 at every iteration and is flagged.
RunReport build_report(const std::filesystem::path& trace_dir,
                       const std::vector<int>& k_values);

nlohmann::json report_to_json(const RunReport& report);

/// Fixed-width text table in the style of the run summaries.
std::string render_table(const RunReport& report);

}  // namespace ddx::metrics

#endif  // DDXFLOW_METRICS_HPP
