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
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ddx/metrics.hpp"
#include "ddx/trace.hpp"

using namespace ddx;
using namespace ddx::metrics;

namespace {

RankedDifferential list_of(std::vector<std::string> entries, int iteration = 1) {
  return RankedDifferential{std::move(entries), iteration};
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ddxflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_synthetic_trace(const std::filesystem::path& dir, const std::string& case_id,
                           const std::string& truth,
                           const std::vector<std::vector<std::string>>& per_iteration_ddx,
                           int max_iterations) {
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(dir, case_id,
                            {{"ground_truth", truth},
                             {"dataset", "ddxplus"},
                             {"max_iterations", max_iterations}},
                            clock);
  for (std::size_t i = 0; i < per_iteration_ddx.size(); ++i) {
    const int iteration = static_cast<int>(i) + 1;
    writer.emit(iteration, trace::Step::Action, trace::Component::Strategy,
                {{"kind", "dispatch"}});
    writer.emit(iteration, trace::Step::Observation, trace::Component::Strategy,
                {{"kind", "ddx"},
                 {"ddx", RankedDifferential{per_iteration_ddx[i], iteration}}});
  }
}

}  // namespace

TEST_CASE("rank_of_truth caps at eleven") {
  CHECK(rank_of_truth(list_of({"A", "B", "C"}), "A") == 1);
  CHECK(rank_of_truth(list_of({"A", "B", "C"}), "Z") == 11);
  std::vector<std::string> ten;
  for (int i = 0; i < 9; ++i) ten.push_back("disease " + std::to_string(i));
  ten.push_back("Target");
  CHECK(rank_of_truth(list_of(ten), "target") == 10);

  // a truth below the top-10 window still scores the cap
  std::vector<std::string> twelve;
  for (int i = 0; i < 12; ++i) twelve.push_back("disease " + std::to_string(i));
  CHECK(rank_of_truth(list_of(twelve), "disease 10") == 11);
  CHECK(rank_of_truth(RankedDifferential{}, "anything") == 11);
}

TEST_CASE("gtpa_at_k counts hits within the cutoff") {
  CHECK(gtpa_at_k({1, 2, 6}, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(gtpa_at_k({1, 2, 6}, 5) == doctest::Approx(2.0 / 3.0));
  CHECK(gtpa_at_k({11, 11, 11}, 10) == 0.0);
  CHECK_THROWS_AS(gtpa_at_k({}, 1), Error);
  CHECK_THROWS_AS(gtpa_at_k({1}, 0), Error);
}

TEST_CASE("gtpa_at_k is non-decreasing in k") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ranks;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) ranks.push_back(1 + static_cast<int>(rng() % 11));
    double last = 0.0;
    for (int k = 1; k <= 11; ++k) {
      const double value = gtpa_at_k(ranks, k);
      CHECK(value >= last);
      last = value;
    }
    CHECK(last == 1.0);
  }
}

TEST_CASE("avg_rank matches hand arithmetic") {
  CHECK(avg_rank({1, 1, 1}) == 1.0);
  CHECK(avg_rank({1, 11}) == 6.0);
  CHECK(avg_rank({2, 3, 5, 11}) == 5.25);
  CHECK_THROWS_AS(avg_rank({}), Error);
}

TEST_CASE("delta_progress follows the iterative-progress definition") {
  CHECK(delta_progress({{"c1", {5, 3, 2}}}) == doctest::Approx(1.5));
  CHECK(delta_progress({{"c1", {4}}}) == 0.0);  // single-iteration case contributes 0
  CHECK(delta_progress({{"c1", {3, 3, 3}}}) == 0.0);
  // two cases averaged: (1.5 + 0) / 2
  CHECK(delta_progress({{"c1", {5, 3, 2}}, {"c2", {7}}}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(delta_progress({}), Error);
}

TEST_CASE("metric bounds hold on random trajectories") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RankTrajectory> trajectories;
    std::vector<int> finals;
    const int cases = 1 + static_cast<int>(rng() % 10);
    for (int c = 0; c < cases; ++c) {
      RankTrajectory t;
      t.case_id = "c" + std::to_string(c);
      const int n = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) t.ranks.push_back(1 + static_cast<int>(rng() % 11));
      finals.push_back(t.ranks.back());
      trajectories.push_back(std::move(t));
    }
    const double avg = avg_rank(finals);
    CHECK(avg >= 1.0);
    CHECK(avg <= 11.0);
    const double delta = delta_progress(trajectories);
    CHECK(delta >= -10.0);
    CHECK(delta <= 10.0);
  }
}

TEST_CASE("constant trajectories give zero progress and first-rank average") {
  std::vector<RankTrajectory> trajectories = {{"a", {4, 4, 4}}, {"b", {9, 9}}};
  CHECK(delta_progress(trajectories) == 0.0);
  CHECK(avg_rank({4, 9}) == 6.5);
}

TEST_CASE("build_report reconstructs trajectories from traces") {
  const auto dir = fresh_dir("report");
  write_synthetic_trace(dir, "case-a", "Target A",
                        {{"Target A", "B"}, {"Target A", "B"}, {"Target A", "B"}}, 3);
  write_synthetic_trace(dir, "case-b", "Target B",
                        {{"X", "Y"}, {"X", "Target B"}, {"Target B", "X"}}, 3);
  write_synthetic_trace(dir, "case-c", "Target C", {}, 3);  // no diagnosis events

  const RunReport report = build_report(dir, {1, 3, 5});
  CHECK(report.case_count == 3);
  // final ranks: a=1, b=1, c=11
  CHECK(report.gtpa.at(1) == doctest::Approx(2.0 / 3.0));
  CHECK(report.gtpa.at(3) == doctest::Approx(2.0 / 3.0));
  CHECK(report.gtpa.at(5) == doctest::Approx(2.0 / 3.0));
  CHECK(report.avg_rank == doctest::Approx((1.0 + 1.0 + 11.0) / 3.0));
  // deltas: a = 0; b = ((11-2)+(2-1))/2 = 5; c = 0 (constant 11s)
  CHECK(report.delta_progress == doctest::Approx(5.0 / 3.0));

  bool flagged = false;
  for (const auto& result : report.per_case) {
    if (result.case_id == "case-c") {
      flagged = result.flagged_no_diagnosis;
      CHECK(result.trajectory.ranks == std::vector<int>{11, 11, 11});
    }
  }
  CHECK(flagged);

  const std::string table = render_table(report);
  CHECK(table.find("GTPA@1") != std::string::npos);
  CHECK(table.find("case-a") != std::string::npos);
}

TEST_CASE("build_report rejects unknown schemas and empty directories") {
  const auto dir = fresh_dir("report_bad");
  {
    std::ofstream out(dir / "bad.trace.jsonl");
    out << R"({"schema":"something.else.v9"})" << "\n";
  }
  try {
    build_report(dir, {1});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MetricsError);
  }

  const auto empty = fresh_dir("report_empty");
  CHECK_THROWS_AS(build_report(empty, {1}), Error);
}
