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
#include "ddx/replay.hpp"

#include <map>
#include <sstream>

#include "ddx/core_model.hpp"
#include "ddx/metrics.hpp"
#include "ddx/trace.hpp"

namespace ddx::replay {

namespace {

std::string one_line(std::string text, std::size_t limit = 100) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  if (text.size() > limit) {
    text.resize(limit - 3);
    text += "...";
  }
  return text;
}

std::string describe_ddx(const RankedDifferential& current,
                         const RankedDifferential* previous) {
  std::ostringstream os;
  std::map<std::string, int> previous_rank;
  if (previous) {
    for (std::size_t i = 0; i < previous->entries.size(); ++i) {
      previous_rank[normalize_text(previous->entries[i])] = static_cast<int>(i) + 1;
    }
  }
  for (std::size_t i = 0; i < current.entries.size(); ++i) {
    const int rank = static_cast<int>(i) + 1;
    os << "      " << rank << ". " << current.entries[i];
    auto it = previous_rank.find(normalize_text(current.entries[i]));
    if (previous == nullptr) {
      // first differential, no movement to report
    } else if (it == previous_rank.end()) {
      os << "  (new)";
    } else if (it->second != rank) {
      os << "  (" << it->second << " -> " << rank << ")";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::string render_case_replay(const std::filesystem::path& trace_file) {
  const trace::TraceFile file = trace::read_trace_file(trace_file);
  std::ostringstream os;
  os << "Case " << file.header.value("case_id", "?") << " ("
     << file.header.value("dataset", "?") << ", policy "
     << file.header.value("policy", "?") << ")\n";

  int current_iteration = -1;
  RankedDifferential last_ddx;
  bool have_ddx = false;
  for (const auto& event : file.events) {
    if (event.iteration != current_iteration) {
      current_iteration = event.iteration;
      os << "\n=== Iteration " << current_iteration << " ===\n";
    }
    const std::string kind = event.payload.value("kind", "");
    std::ostringstream line;
    line << "  [" << event.wall_time << "] " << trace::to_string(event.step) << " / "
         << trace::to_string(event.component) << ": ";
    if (kind == "plan" || kind == "stop" || kind == "forced_strategy") {
      line << kind;
      if (event.payload.contains("text")) {
        line << " - " << one_line(event.payload.value("text", ""));
      }
      if (event.payload.contains("reason")) {
        line << " (" << event.payload.value("reason", "") << ")";
      }
    } else if (kind == "instruction_fallback" || kind == "chooser_fallback") {
      line << ">>> FALLBACK <<< " << kind;
      if (event.payload.contains("target")) line << " for " << event.payload.value("target", "");
      if (event.payload.contains("chosen")) line << " chose " << event.payload.value("chosen", "");
    } else if (kind == "dispatch") {
      line << "dispatch";
      if (event.payload.contains("goals")) {
        line << " with " << event.payload.at("goals").size() << " goals";
      }
      if (event.payload.contains("query")) {
        line << " query: " << one_line(event.payload.value("query", ""));
      }
      if (event.payload.contains("instructions")) {
        line << " with " << event.payload.at("instructions").size() << " instructions";
      }
    } else if (kind == "chat_request") {
      const auto& request = event.payload.at("request");
      std::string content;
      if (request.contains("messages") && !request.at("messages").empty()) {
        content = request.at("messages").back().value("content", "");
      }
      line << "chat request: " << one_line(content, 80);
    } else if (kind == "chat_response") {
      if (event.payload.value("ok", false)) {
        line << "chat response (" << event.payload.value("attempts", 1)
             << " attempt(s)): " << one_line(event.payload.value("response", ""), 80);
      } else {
        line << "chat FAILED after " << event.payload.value("attempts", 1)
             << " attempt(s): " << one_line(event.payload.value("error", ""), 80);
      }
    } else if (kind == "dialogue") {
      line << "dialogue: " << event.payload.value("doctor_turns", 0) << " doctor question(s), "
           << "ended by " << event.payload.value("ended_by", "?");
    } else if (kind == "profile_update") {
      line << "profile: +" << event.payload.value("added", 0) << " fact(s), total "
           << event.payload.value("total_facts", 0);
    } else if (kind == "evidence") {
      line << "evidence: " << one_line(event.payload.value("summary", ""), 80);
    } else if (kind == "ddx") {
      const auto ddx = event.payload.at("ddx").get<RankedDifferential>();
      line << "ranked differential:\n" << describe_ddx(ddx, have_ddx ? &last_ddx : nullptr);
      last_ddx = ddx;
      have_ddx = true;
    } else if (kind == "error") {
      line << "ERROR: " << one_line(event.payload.value("error", ""), 80);
    } else {
      line << (kind.empty() ? event.payload.dump() : kind);
    }
    const std::string rendered = line.str();
    os << rendered;
    if (rendered.empty() || rendered.back() != '\n') os << "\n";
  }

  if (!file.header.value("ground_truth", std::string()).empty() && have_ddx) {
    os << "\nFinal rank of ground truth: " << metrics::rank_of_truth(last_ddx, file.header.at("ground_truth").get<std::string>())
       << "\n";
  }
  return os.str();
}

}  // namespace ddx::replay
