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
#include "ddx/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ddx/trace.hpp"

namespace ddx::metrics {

int rank_of_truth(const RankedDifferential& ddx, const std::string& truth) {
  const std::string key = normalize_text(truth);
  const std::size_t window = std::min<std::size_t>(ddx.entries.size(), kRankCap - 1);
  for (std::size_t i = 0; i < window; ++i) {
    if (normalize_text(ddx.entries[i]) == key) return static_cast<int>(i) + 1;
  }
  return kRankCap;
}

double gtpa_at_k(const std::vector<int>& final_ranks, int k) {
  if (k < 1) {
    throw Error(ErrorCode::InvalidArgument, "gtpa_at_k: k must be >= 1");
  }
  if (final_ranks.empty()) {
    throw Error(ErrorCode::MetricsError, "gtpa_at_k: no ranks");
  }
  std::size_t hits = 0;
  for (int rank : final_ranks) {
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(final_ranks.size());
}

double avg_rank(const std::vector<int>& final_ranks) {
  if (final_ranks.empty()) {
    throw Error(ErrorCode::MetricsError, "avg_rank: no ranks");
  }
  double sum = 0.0;
  for (int rank : final_ranks) sum += rank;
  return sum / static_cast<double>(final_ranks.size());
}

double delta_progress(const std::vector<RankTrajectory>& trajectories) {
  if (trajectories.empty()) {
    throw Error(ErrorCode::MetricsError, "delta_progress: no trajectories");
  }
  double outer_sum = 0.0;
  for (const auto& trajectory : trajectories) {
    const auto& r = trajectory.ranks;
    if (r.empty()) {
      throw Error(ErrorCode::MetricsError,
                  "delta_progress: empty trajectory for case " + trajectory.case_id);
    }
    if (r.size() < 2) continue;  // single-iteration cases contribute 0
    double inner_sum = 0.0;
    for (std::size_t t = 0; t + 1 < r.size(); ++t) {
      inner_sum += static_cast<double>(r[t] - r[t + 1]);
    }
    outer_sum += inner_sum / static_cast<double>(r.size() - 1);
  }
  return outer_sum / static_cast<double>(trajectories.size());
}

RunReport build_report(const std::filesystem::path& trace_dir,
                       const std::vector<int>& k_values) {
  if (!std::filesystem::is_directory(trace_dir)) {
    throw Error(ErrorCode::MetricsError, "trace directory not found: " + trace_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(trace_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 12 &&
        name.substr(name.size() - 12) == ".trace.jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw Error(ErrorCode::MetricsError, "no trace files in " + trace_dir.string());
  }

  RunReport report;
  std::vector<RankTrajectory> trajectories;
  std::vector<int> final_ranks;
  for (const auto& file : files) {
    const trace::TraceFile trace_file = trace::read_trace_file(file);
    const std::string case_id = trace_file.header.value("case_id", file.filename().string());
    const std::string truth = trace_file.header.value("ground_truth", "");
    if (truth.empty()) {
      throw Error(ErrorCode::MetricsError, case_id + ": trace header lacks ground_truth");
    }
    const int max_iterations = trace_file.header.value("max_iterations", 1);

    CaseResult result;
    result.case_id = case_id;
    result.trajectory.case_id = case_id;
    for (const auto& event : trace_file.events) {
      if (event.component != trace::Component::Strategy ||
          event.step != trace::Step::Observation || !event.payload.contains("ddx")) {
        continue;
      }
      const auto ddx = event.payload.at("ddx").get<RankedDifferential>();
      result.trajectory.ranks.push_back(rank_of_truth(ddx, truth));
    }
    if (!trace_file.events.empty()) {
      result.wall_time = trace_file.events.back().wall_time;
    }
    if (result.trajectory.ranks.empty()) {
      result.flagged_no_diagnosis = true;
      result.trajectory.ranks.assign(static_cast<std::size_t>(std::max(1, max_iterations)),
                                     kRankCap);
    }
    result.final_rank = result.trajectory.ranks.back();
    final_ranks.push_back(result.final_rank);
    trajectories.push_back(result.trajectory);
    report.per_case.push_back(std::move(result));
  }

  report.case_count = report.per_case.size();
  for (int k : k_values) report.gtpa[k] = gtpa_at_k(final_ranks, k);
  report.avg_rank = avg_rank(final_ranks);
  report.delta_progress = delta_progress(trajectories);
  return report;
}

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json gtpa = nlohmann::json::object();
  for (const auto& [k, value] : report.gtpa) gtpa["@" + std::to_string(k)] = value;
  nlohmann::json per_case = nlohmann::json::array();
  for (const auto& result : report.per_case) {
    per_case.push_back({{"case_id", result.case_id},
                        {"final_rank", result.final_rank},
                        {"ranks", result.trajectory.ranks},
                        {"flagged_no_diagnosis", result.flagged_no_diagnosis},
                        {"wall_time", result.wall_time}});
  }
  return nlohmann::json{{"schema", "ddxflow.report.v1"},
                        {"case_count", report.case_count},
                        {"gtpa", gtpa},
                        {"avg_rank", report.avg_rank},
                        {"delta_progress", report.delta_progress},
                        {"per_case", per_case}};
}

std::string render_table(const RunReport& report) {
  std::ostringstream os;
  char buffer[64];
  os << "cases  ";
  for (const auto& [k, _] : report.gtpa) {
    std::snprintf(buffer, sizeof(buffer), "GTPA@%-4d", k);
    os << buffer;
  }
  os << "avg_rank  d_progress\n";
  std::snprintf(buffer, sizeof(buffer), "%-7zu", report.case_count);
  os << buffer;
  for (const auto& [_, value] : report.gtpa) {
    std::snprintf(buffer, sizeof(buffer), "%-9.2f", value);
    os << buffer;
  }
  std::snprintf(buffer, sizeof(buffer), "%-10.2f%+.2f\n", report.avg_rank,
                report.delta_progress);
  os << buffer;

  os << "\ncase_id                final_rank  trajectory\n";
  for (const auto& result : report.per_case) {
    std::snprintf(buffer, sizeof(buffer), "%-23s%-12d", result.case_id.c_str(),
                  result.final_rank);
    os << buffer;
    for (std::size_t i = 0; i < result.trajectory.ranks.size(); ++i) {
      if (i) os << " -> ";
      os << result.trajectory.ranks[i];
    }
    if (result.flagged_no_diagnosis) os << "  [no diagnosis produced]";
    os << "\n";
  }
  return os.str();
}

}  // namespace ddx::metrics
