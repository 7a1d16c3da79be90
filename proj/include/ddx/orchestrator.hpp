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
#ifndef DDXFLOW_ORCHESTRATOR_HPP
#define DDXFLOW_ORCHESTRATOR_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddx/core_model.hpp"
#include "ddx/diagnosis_strategy.hpp"
#include "ddx/history_taking.hpp"
#include "ddx/knowledge_retrieval.hpp"
#include "ddx/prompts.hpp"
#include "ddx/trace.hpp"

namespace ddx::driver {

enum class PolicyKind { Fixed, Dynamic };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct IterationPolicy {
  PolicyKind kind = PolicyKind::Fixed;
  int max_iterations = 3;
  int questions_per_iteration = 5;
};

/// Everything the driver knows about one case-run. The case's ground truth
/// is never rendered into any prompt; the profile starts from initial info
/// only, never from the hidden full profile.
struct DriverState {
  PatientCase patient;
  PatientProfile profile;
  std::vector<RankedDifferential> ddx_history;
  std::vector<retrieval::EvidenceSummary> evidence_cache;
  std::vector<history::DialogueSession> dialogue_log;
  int iteration = 0;  // completed iterations
};

enum class StopReason { MaxIterations, Stabilized };

std::string to_string(StopReason reason);

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::MaxIterations;
};

/// Stop(MaxIterations) once iteration >= max_iterations; Stop(Stabilized)
/// when enabled and the last two differentials are entry-wise identical.
StopDecision check_stop(const DriverState& state, const IterationPolicy& policy,
                        bool stabilization_enabled);

/// Appends only facts not already present (normalized comparison).
/// Returns the number added; the count never decreases.
std::size_t merge_facts(PatientProfile& profile, const std::vector<std::string>& new_facts,
                        FactSource source);

struct AgentInstruction {
  trace::Component target = trace::Component::Simulator;
  std::vector<std::string> items;  // <= kMaxInstructionItems
  bool from_fallback = false;
};

inline constexpr int kMaxInstructionItems = 10;

/// Parses a numbered or bulleted instruction list from a model reply.
std::vector<std::string> parse_instruction_list(const std::string& reply);

struct StrategyRequest {
  const PatientProfile& profile;
  const std::optional<InitialInfo>& initial;
  const std::vector<std::string>& options;
  strategy::DiagnoseContext context;
};

// Component call points. Production wiring adapts the real agents; tests may
// plug deterministic fakes behind the same shapes.
using SimulatorFn = std::function<history::DialogueSession(
    const PatientProfile& known, const std::optional<InitialInfo>& initial,
    const std::vector<std::string>& goals, int max_questions)>;
using RetrievalFn = std::function<retrieval::EvidenceSummary(const retrieval::SearchQuery&)>;
using StrategyFn = std::function<RankedDifferential(const StrategyRequest&)>;

struct Components {
  SimulatorFn simulator;
  RetrievalFn retrieval;
  StrategyFn strategy;
};

enum class InstructionMode { Defaults, Llm };

struct DriverConfig {
  IterationPolicy policy;
  bool stop_on_stabilize = false;
  InstructionMode instruction_mode = InstructionMode::Llm;
  retrieval::Source retrieval_source = retrieval::Source::Wikipedia;
};

/// The central orchestrator for one case: plans thought/action/observation
/// steps, dispatches the simulator and agents under the iteration policy,
/// maintains the profile and differential history, and logs the full trace.
class Driver {
 public:
  Driver(PatientCase patient, DriverConfig config, Components components,
         trace::TraceWriter* writer, std::shared_ptr<int> iteration_cell,
         llm::ChatClient driver_chat = {},
         const prompts::PromptLibrary& prompts = prompts::PromptLibrary::builtin());

  /// Runs to completion under the configured policy. Throws
  /// Error(CaseFailure) when no diagnosis could be produced.
  DriverState run();

  /// LLM-generated instruction list for a component, with a fixed default
  /// list as fallback (fallbacks are logged, never surfaced as errors).
  AgentInstruction build_agent_instruction(trace::Component target);

  const DriverState& state() const { return state_; }

 private:
  DriverState run_fixed();
  DriverState run_dynamic();

  void step_simulator();
  void step_retrieval();
  /// Returns false when the strategy step failed.
  bool step_strategy();

  std::string available_info() const;
  std::vector<std::string> default_instructions(trace::Component target) const;
  trace::Component choose_next_component(trace::Component fallback);
  void log(trace::Step step, trace::Component component, nlohmann::json payload);
  int current_iteration() const { return *iteration_cell_; }

  DriverConfig config_;
  Components components_;
  trace::TraceWriter* writer_;
  std::shared_ptr<int> iteration_cell_;
  llm::ChatClient driver_chat_;
  std::string instruction_template_;
  std::string chooser_template_;
  DriverState state_;
};

}  // namespace ddx::driver

#endif  // DDXFLOW_ORCHESTRATOR_HPP
