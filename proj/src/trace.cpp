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
#include "ddx/trace.hpp"

#include "ddx/errors.hpp"

namespace ddx::trace {

std::string to_string(Step step) {
  switch (step) {
    case Step::Thought: return "thought";
    case Step::Action: return "action";
    case Step::Observation: return "observation";
  }
  return "unknown";
}

Step step_from_string(std::string_view name) {
  if (name == "thought") return Step::Thought;
  if (name == "action") return Step::Action;
  if (name == "observation") return Step::Observation;
  throw Error(ErrorCode::MetricsError, "unknown trace step '" + std::string(name) + "'");
}

std::string to_string(Component component) {
  switch (component) {
    case Component::Driver: return "driver";
    case Component::Simulator: return "simulator";
    case Component::Retrieval: return "retrieval";
    case Component::Strategy: return "strategy";
  }
  return "unknown";
}

Component component_from_string(std::string_view name) {
  if (name == "driver") return Component::Driver;
  if (name == "simulator") return Component::Simulator;
  if (name == "retrieval") return Component::Retrieval;
  if (name == "strategy") return Component::Strategy;
  throw Error(ErrorCode::MetricsError, "unknown trace component '" + std::string(name) + "'");
}

SystemClock::SystemClock() : start_(std::chrono::steady_clock::now()) {}

double SystemClock::now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void to_json(nlohmann::json& j, const TraceEvent& event) {
  j = nlohmann::json{{"case_id", event.case_id},
                     {"iteration", event.iteration},
                     {"step", to_string(event.step)},
                     {"component", to_string(event.component)},
                     {"payload", event.payload},
                     {"wall_time", event.wall_time}};
}

void from_json(const nlohmann::json& j, TraceEvent& event) {
  event.case_id = j.at("case_id").get<std::string>();
  event.iteration = j.at("iteration").get<int>();
  event.step = step_from_string(j.at("step").get<std::string>());
  event.component = component_from_string(j.at("component").get<std::string>());
  event.payload = j.at("payload");
  event.wall_time = j.at("wall_time").get<double>();
}

TraceWriter::TraceWriter(const std::filesystem::path& dir, std::string case_id,
                         nlohmann::json header_extras, std::shared_ptr<Clock> clock)
    : case_id_(std::move(case_id)), clock_(std::move(clock)) {
  std::filesystem::create_directories(dir);
  path_ = dir / (case_id_ + ".trace.jsonl");
  out_.open(path_, std::ios::trunc);
  if (!out_) {
    throw Error(ErrorCode::ConfigError, "cannot open trace file " + path_.string());
  }
  nlohmann::json header = std::move(header_extras);
  header["schema"] = kTraceSchema;
  header["case_id"] = case_id_;
  out_ << header.dump() << "\n";
}

TraceWriter::~TraceWriter() { close(); }

void TraceWriter::close() {
  if (out_.is_open()) {
    out_.flush();
    out_.close();
  }
}

void TraceWriter::emit(int iteration, Step step, Component component, nlohmann::json payload) {
  TraceEvent event;
  event.case_id = case_id_;
  event.iteration = iteration;
  event.step = step;
  event.component = component;
  event.payload = std::move(payload);
  event.wall_time = clock_ ? clock_->now() : 0.0;
  nlohmann::json j = event;
  out_ << j.dump() << "\n";
}

llm::ChatObserver TraceWriter::chat_observer(Component component, const int* iteration) {
  return [this, component, iteration](const llm::ChatCallRecord& record) {
    const int it = iteration ? *iteration : 0;
    emit(it, Step::Action, component,
         nlohmann::json{{"kind", "chat_request"}, {"request", record.request.to_json()}});
    nlohmann::json observation{{"kind", "chat_response"},
                               {"attempts", record.attempts},
                               {"ok", record.ok}};
    if (record.ok) {
      observation["response"] = record.response;
    } else {
      observation["error"] = record.error;
    }
    emit(it, Step::Observation, component, std::move(observation));
  };
}

TraceFile read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::MetricsError, "cannot open trace file " + path.string());
  }
  TraceFile file;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MetricsError, path.filename().string() + " line " +
                                               std::to_string(line_number) + ": " + e.what());
    }
    if (line_number == 1) {
      if (!j.contains("schema") || j.at("schema").get<std::string>() != kTraceSchema) {
        throw Error(ErrorCode::MetricsError,
                    path.filename().string() + " line 1: unsupported trace schema");
      }
      file.header = std::move(j);
      continue;
    }
    try {
      file.events.push_back(j.get<TraceEvent>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::MetricsError, path.filename().string() + " line " +
                                               std::to_string(line_number) + ": " + e.what());
    }
  }
  if (file.header.is_null()) {
    throw Error(ErrorCode::MetricsError, path.filename().string() + ": empty trace file");
  }
  return file;
}

}  // namespace ddx::trace
