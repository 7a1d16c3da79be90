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
#ifndef DDXFLOW_HISTORY_TAKING_HPP
#define DDXFLOW_HISTORY_TAKING_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddx/core_model.hpp"
#include "ddx/llm_provider.hpp"
#include "ddx/prompts.hpp"

namespace ddx::history {

/// Sentinel line a doctor reply uses to signal conversation completion.
inline constexpr const char* kEndToken = "[END_OF_HISTORY_TAKING]";

enum class Speaker { Doctor, Patient };

std::string to_string(Speaker speaker);

struct DialogueTurn {
  Speaker speaker;
  std::string text;
  int turn_index = 0;
};

enum class DialogueEnd { MaxQuestions, DoctorEnded, GoalsMet };

std::string to_string(DialogueEnd end);

struct DialogueSession {
  std::vector<DialogueTurn> turns;
  int max_questions = 0;
  std::vector<std::string> goals;
  DialogueEnd ended_by = DialogueEnd::MaxQuestions;

  int doctor_turns() const;
  /// "Doctor: ...\nPatient: ..." rendering used inside prompts.
  std::string transcript() const;
};

/// The patient side's hidden knowledge.
struct PatientSimState {
  std::vector<std::string> full_profile;
  std::optional<InitialInfo> initial_info;
};

/// LLM doctor. Asks one question per call or signals the end of the
/// conversation via kEndToken.
class DoctorAgent {
 public:
  DoctorAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts);

  /// Returns the next question, or nullopt on the end signal. Re-prompts
  /// once on an empty reply; throws Error(SimulatorError) after that.
  std::optional<std::string> next_question(const DialogueSession& history,
                                           const std::optional<InitialInfo>& initial,
                                           const std::vector<std::string>& goals);

 private:
  llm::ChatClient chat_;
  std::string template_text_;
  std::string preface_;
};

class PatientSim {
 public:
  virtual ~PatientSim() = default;

  /// Throws Error(InvalidArgument) on an empty question and
  /// Error(SimulatorError) on backend failure.
  virtual std::string answer(const std::string& question,
                             const DialogueSession& history) = 0;
};

/// LLM patient constrained by the patient prompt to its hidden profile.
class LlmPatient : public PatientSim {
 public:
  LlmPatient(llm::ChatClient chat, const prompts::PromptLibrary& prompts,
             PatientSimState state);

  std::string answer(const std::string& question, const DialogueSession& history) override;

 private:
  llm::ChatClient chat_;
  std::string template_text_;
  PatientSimState state_;
};

/// Deterministic rule-based patient: answers "Yes."/"No." when the profile
/// explicitly contains/negates the asked fact and "I don't know." otherwise.
/// Never asserts a fact absent from the profile.
class OraclePatient : public PatientSim {
 public:
  explicit OraclePatient(PatientSimState state);

  std::string answer(const std::string& question, const DialogueSession& history) override;

 private:
  PatientSimState state_;
};

/// Runs alternating Doctor/Patient turns until the doctor ends the
/// conversation or max_questions doctor turns have been asked. The caller
/// owns what happens to the session (profile merging is the driver's job).
/// On a mid-session simulator error the partial session is attached to the
/// rethrown error's message and partial_out (when given).
DialogueSession run_dialogue(DoctorAgent& doctor, PatientSim& patient,
                             const std::optional<InitialInfo>& initial,
                             const std::vector<std::string>& goals, int max_questions,
                             DialogueSession* partial_out = nullptr);

/// Turns each informative Q/A pair into one declarative fact string
/// ("Has fever: yes" style). "I don't know." answers contribute nothing.
std::vector<std::string> extract_profile_facts(const DialogueSession& session);

}  // namespace ddx::history

#endif  // DDXFLOW_HISTORY_TAKING_HPP
