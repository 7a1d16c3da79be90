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
#ifndef DDXFLOW_TRACE_HPP
#define DDXFLOW_TRACE_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddx/llm_provider.hpp"

namespace ddx::trace {

inline constexpr const char* kTraceSchema = "ddxflow.trace.v1";

enum class Step { Thought, Action, Observation };
enum class Component { Driver, Simulator, Retrieval, Strategy };

std::string to_string(Step step);
Step step_from_string(std::string_view name);
std::string to_string(Component component);
Component component_from_string(std::string_view name);

struct TraceEvent {
  std::string case_id;
  int iteration = 0;
  Step step = Step::Thought;
  Component component = Component::Driver;
  nlohmann::json payload;
  double wall_time = 0.0;
};

/// Time source for trace events. The logical clock makes scripted runs
/// byte-identical across executions; the system clock reports seconds since
/// run start.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
};

class SystemClock : public Clock {
 public:
  SystemClock();
  double now() override;

 private:
  std::chrono::steady_clock::time_point start_;
};

class LogicalClock : public Clock {
 public:
  double now() override { return static_cast<double>(ticks_.fetch_add(1)); }

 private:
  std::atomic<long> ticks_{0};
};

/// Line-delimited trace for one case: a schema header line followed by one
/// JSON event per line. Owned by a single case-run.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& dir, std::string case_id,
              nlohmann::json header_extras, std::shared_ptr<Clock> clock);
  ~TraceWriter();

  void emit(int iteration, Step step, Component component, nlohmann::json payload);

  /// Observer that logs each chat call as an Action/Observation pair for the
  /// given component. The iteration is read through the pointer at call time.
  llm::ChatObserver chat_observer(Component component, const int* iteration);

  const std::filesystem::path& path() const { return path_; }
  void close();

 private:
  std::string case_id_;
  std::filesystem::path path_;
  std::ofstream out_;
  std::shared_ptr<Clock> clock_;
};

struct TraceFile {
  nlohmann::json header;
  std::vector<TraceEvent> events;
};

/// Throws Error(MetricsError) naming the offending line on malformed input
/// or a schema-version mismatch.
TraceFile read_trace_file(const std::filesystem::path& path);

/// json representations (used by the writer, reader, and tests).
void to_json(nlohmann::json& j, const TraceEvent& event);
void from_json(const nlohmann::json& j, TraceEvent& event);

}  // namespace ddx::trace

#endif  // DDXFLOW_TRACE_HPP
