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
#include "ddx/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ddx::driver {

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::Fixed ? "fixed" : "dynamic";
}

PolicyKind policy_kind_from_string(std::string_view name) {
  if (name == "fixed") return PolicyKind::Fixed;
  if (name == "dynamic") return PolicyKind::Dynamic;
  throw Error(ErrorCode::InvalidArgument, "unknown policy kind '" + std::string(name) + "'");
}

std::string to_string(StopReason reason) {
  return reason == StopReason::MaxIterations ? "max_iterations" : "stabilized";
}

StopDecision check_stop(const DriverState& state, const IterationPolicy& policy,
                        bool stabilization_enabled) {
  if (state.iteration >= policy.max_iterations) {
    return {true, StopReason::MaxIterations};
  }
  if (stabilization_enabled && state.ddx_history.size() >= 2) {
    const auto& previous = state.ddx_history[state.ddx_history.size() - 2];
    const auto& last = state.ddx_history.back();
    if (previous.same_entries(last)) return {true, StopReason::Stabilized};
  }
  return {};
}

std::size_t merge_facts(PatientProfile& profile, const std::vector<std::string>& new_facts,
                        FactSource source) {
  return profile.merge(new_facts, source);
}

std::vector<std::string> parse_instruction_list(const std::string& reply) {
  std::vector<std::string> items;
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = std::string::npos;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
      start = i + 1;
    } else {
      std::size_t digits = i;
      while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) {
        ++digits;
      }
      if (digits > i && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
        start = digits + 1;
      }
    }
    if (start == std::string::npos) continue;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    std::size_t end = line.size();
    while (end > start && std::isspace(static_cast<unsigned char>(line[end - 1]))) --end;
    if (end > start) items.push_back(line.substr(start, end - start));
  }
  return items;
}

Driver::Driver(PatientCase patient, DriverConfig config, Components components,
               trace::TraceWriter* writer, std::shared_ptr<int> iteration_cell,
               llm::ChatClient driver_chat, const prompts::PromptLibrary& prompts)
    : config_(config),
      components_(std::move(components)),
      writer_(writer),
      iteration_cell_(std::move(iteration_cell)),
      driver_chat_(std::move(driver_chat)),
      instruction_template_(prompts.text("driver_instruction")),
      chooser_template_(prompts.text("driver_chooser")) {
  if (!iteration_cell_) iteration_cell_ = std::make_shared<int>(0);
  state_.patient = std::move(patient);
  // The working profile starts from initial info only.
  if (state_.patient.initial_info) {
    const auto& info = *state_.patient.initial_info;
    if (info.age) state_.profile.add("Age: " + std::to_string(*info.age), FactSource::Initial);
    if (info.sex) state_.profile.add("Sex: " + *info.sex, FactSource::Initial);
    if (info.chief_complaint) {
      state_.profile.add("Chief complaint: " + *info.chief_complaint, FactSource::Initial);
    }
  }
}

void Driver::log(trace::Step step, trace::Component component, nlohmann::json payload) {
  if (writer_) writer_->emit(current_iteration(), step, component, std::move(payload));
}

std::string Driver::available_info() const {
  std::ostringstream os;
  os << "Patient Initial Information:\n";
  os << (state_.patient.initial_info ? state_.patient.initial_info->to_text() : "None.");
  os << "\n\nPatient Profile:\n";
  if (state_.profile.empty()) {
    os << "None.";
  } else {
    bool first = true;
    for (const auto& fact : state_.profile.facts()) {
      if (!first) os << '\n';
      os << "- " << fact.text;
      first = false;
    }
  }
  os << "\n\nDialogue History:\n";
  os << (state_.dialogue_log.empty() ? "None." : state_.dialogue_log.back().transcript());
  os << "\n\nPrevious RAG Content:\n";
  if (state_.evidence_cache.empty()) {
    os << "None.";
  } else {
    os << state_.evidence_cache.back().text;
  }
  os << "\n\nPrevious Ranked Differential Diagnoses:\n";
  if (state_.ddx_history.empty()) {
    os << "None.";
  } else {
    for (std::size_t i = 0; i < state_.ddx_history.size(); ++i) {
      if (i) os << "\n\n";
      os << "Iteration " << state_.ddx_history[i].produced_at_iteration << ":\n"
         << render_ranked_list(state_.ddx_history[i]);
    }
  }
  return os.str();
}

std::vector<std::string> Driver::default_instructions(trace::Component target) const {
  switch (target) {
    case trace::Component::Simulator:
      return {"Ask about the onset and duration of the main complaint.",
              "Ask about associated symptoms the patient has not yet mentioned.",
              "Ask about relevant medical history, medications, and treatments.",
              "Ask about exposures, travel, and family history."};
    case trace::Component::Retrieval: {
      std::string topic = "Diseases consistent with the patient's findings";
      if (!state_.profile.empty()) {
        topic += ":";
        int listed = 0;
        for (const auto& fact : state_.profile.facts()) {
          if (listed >= 6) break;
          topic += " " + fact.text + ";";
          ++listed;
        }
        topic.pop_back();
      }
      return {topic};
    }
    case trace::Component::Strategy:
      return {"Rank the candidate diseases by how well they explain the known findings.",
              "Weigh newly learned facts more heavily than the previous ranking."};
    default:
      return {};
  }
}

namespace {

struct AgentDescription {
  const char* function;
  const char* prompt_guide;
};

AgentDescription describe(trace::Component target) {
  switch (target) {
    case trace::Component::Simulator:
      return {"Runs a history-taking dialogue with the patient to gather new symptoms and "
              "antecedents.",
              "Provide a numbered list of conversation goals: topics or questions the doctor "
              "should cover with the patient."};
    case trace::Component::Retrieval:
      return {"Searches external medical sources and synthesizes an evidence summary.",
              "Provide a numbered list of search topics: diseases or findings to look up."};
    case trace::Component::Strategy:
      return {"Produces a ranked differential diagnosis from the current information.",
              "Provide a numbered list of short instructions to focus the diagnosis."};
    default:
      return {"", ""};
  }
}

}  // namespace

AgentInstruction Driver::build_agent_instruction(trace::Component target) {
  AgentInstruction instruction;
  instruction.target = target;

  if (config_.instruction_mode == InstructionMode::Llm && driver_chat_.valid()) {
    const AgentDescription description = describe(target);
    const std::string prompt = prompts::render_template(
        instruction_template_,
        {{"AGENT_FUNCTION", description.function},
         {"AGENT_PROMPT_GUIDE", description.prompt_guide},
         {"AVAILABLE_INFO", available_info()},
         {"MAX_ITEMS", std::to_string(kMaxInstructionItems)}});
    llm::ChatRequest request;
    request.messages.push_back({llm::Role::User, prompt});
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string reply;
      try {
        reply = driver_chat_.complete(request);
      } catch (const Error&) {
        break;  // fall through to defaults
      }
      std::vector<std::string> items = parse_instruction_list(reply);
      if (!items.empty()) {
        if (items.size() > kMaxInstructionItems) items.resize(kMaxInstructionItems);
        instruction.items = std::move(items);
        return instruction;
      }
      request.messages.push_back({llm::Role::Assistant, reply});
      request.messages.push_back(
          {llm::Role::User, "Respond with a numbered instruction list, nothing else."});
    }
    log(trace::Step::Thought, trace::Component::Driver,
        {{"kind", "instruction_fallback"}, {"target", trace::to_string(target)}});
  }

  instruction.items = default_instructions(target);
  instruction.from_fallback = true;
  if (instruction.items.size() > kMaxInstructionItems) {
    instruction.items.resize(kMaxInstructionItems);
  }
  return instruction;
}

void Driver::step_simulator() {
  log(trace::Step::Thought, trace::Component::Driver,
      {{"kind", "plan"}, {"component", "simulator"},
       {"text", "Gather more history from the patient."}});
  AgentInstruction instruction = build_agent_instruction(trace::Component::Simulator);
  log(trace::Step::Action, trace::Component::Simulator,
      {{"kind", "dispatch"},
       {"goals", instruction.items},
       {"from_fallback", instruction.from_fallback},
       {"max_questions", config_.policy.questions_per_iteration}});
  try {
    history::DialogueSession session =
        components_.simulator(state_.profile, state_.patient.initial_info, instruction.items,
                              config_.policy.questions_per_iteration);
    const std::vector<std::string> facts = history::extract_profile_facts(session);
    log(trace::Step::Observation, trace::Component::Simulator,
        {{"kind", "dialogue"},
         {"doctor_turns", session.doctor_turns()},
         {"ended_by", history::to_string(session.ended_by)},
         {"transcript", session.transcript()},
         {"extracted_facts", facts}});
    state_.dialogue_log.push_back(std::move(session));
    const std::size_t added = merge_facts(state_.profile, facts, FactSource::Dialogue);
    log(trace::Step::Thought, trace::Component::Driver,
        {{"kind", "profile_update"},
         {"added", added},
         {"total_facts", state_.profile.size()}});
  } catch (const Error& e) {
    log(trace::Step::Observation, trace::Component::Simulator,
        {{"kind", "error"}, {"error", e.what()}});
  }
}

void Driver::step_retrieval() {
  log(trace::Step::Thought, trace::Component::Driver,
      {{"kind", "plan"}, {"component", "retrieval"},
       {"text", "Look up external evidence for the current findings."}});
  AgentInstruction instruction = build_agent_instruction(trace::Component::Retrieval);
  retrieval::SearchQuery query;
  query.source = config_.retrieval_source;
  for (const auto& item : instruction.items) {
    if (!query.text.empty()) query.text += "; ";
    query.text += item;
  }
  if (query.text.empty()) query.text = "differential diagnosis evidence";
  log(trace::Step::Action, trace::Component::Retrieval,
      {{"kind", "dispatch"},
       {"query", query.text},
       {"source", retrieval::to_string(query.source)},
       {"from_fallback", instruction.from_fallback}});
  try {
    retrieval::EvidenceSummary evidence = components_.retrieval(query);
    log(trace::Step::Observation, trace::Component::Retrieval,
        {{"kind", "evidence"},
         {"summary", evidence.text},
         {"cited_documents", evidence.cited_documents}});
    state_.evidence_cache.push_back(std::move(evidence));
  } catch (const Error& e) {
    log(trace::Step::Observation, trace::Component::Retrieval,
        {{"kind", "error"}, {"error", e.what()}});
  }
}

bool Driver::step_strategy() {
  log(trace::Step::Thought, trace::Component::Driver,
      {{"kind", "plan"}, {"component", "strategy"},
       {"text", "Refine the ranked differential with the updated information."}});
  AgentInstruction instruction = build_agent_instruction(trace::Component::Strategy);
  log(trace::Step::Action, trace::Component::Strategy,
      {{"kind", "dispatch"},
       {"instructions", instruction.items},
       {"from_fallback", instruction.from_fallback}});
  strategy::DiagnoseContext context;
  context.previous = state_.ddx_history;
  context.instructions = instruction.items;
  if (context.instructions.size() > kMaxInstructionItems) {
    context.instructions.resize(kMaxInstructionItems);
  }
  if (!state_.evidence_cache.empty()) context.evidence = state_.evidence_cache.back();
  context.iteration = current_iteration();
  try {
    RankedDifferential ddx = components_.strategy(StrategyRequest{
        state_.profile, state_.patient.initial_info, state_.patient.diagnosis_options,
        std::move(context)});
    ddx.produced_at_iteration = current_iteration();
    log(trace::Step::Observation, trace::Component::Strategy,
        {{"kind", "ddx"}, {"ddx", ddx}});
    state_.ddx_history.push_back(std::move(ddx));
    return true;
  } catch (const Error& e) {
    log(trace::Step::Observation, trace::Component::Strategy,
        {{"kind", "error"}, {"error", e.what()}});
    if (state_.ddx_history.empty()) {
      throw Error(ErrorCode::CaseFailure,
                  "strategy failed with no earlier differential to fall back on: " +
                      std::string(e.what()));
    }
    return false;
  }
}

DriverState Driver::run() {
  return config_.policy.kind == PolicyKind::Fixed ? run_fixed() : run_dynamic();
}

DriverState Driver::run_fixed() {
  for (;;) {
    *iteration_cell_ = state_.iteration + 1;
    step_simulator();
    step_retrieval();
    step_strategy();
    state_.iteration = current_iteration();
    const StopDecision decision = check_stop(state_, config_.policy, config_.stop_on_stabilize);
    if (decision.stop) {
      log(trace::Step::Thought, trace::Component::Driver,
          {{"kind", "stop"}, {"reason", to_string(decision.reason)}});
      break;
    }
  }
  if (state_.ddx_history.empty()) {
    throw Error(ErrorCode::CaseFailure, "run produced no differential diagnosis");
  }
  return state_;
}

trace::Component Driver::choose_next_component(trace::Component fallback) {
  if (driver_chat_.valid()) {
    const std::string prompt = prompts::render_template(
        chooser_template_, {{"AVAILABLE_INFO", available_info()}});
    llm::ChatRequest request;
    request.messages.push_back({llm::Role::User, prompt});
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string reply;
      try {
        reply = driver_chat_.complete(request);
      } catch (const Error&) {
        break;
      }
      std::string upper;
      for (char c : reply) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      const bool sim = upper.find("SIMULATOR") != std::string::npos;
      const bool ret = upper.find("RETRIEVAL") != std::string::npos;
      const bool strat = upper.find("STRATEGY") != std::string::npos;
      if (sim + ret + strat == 1) {
        if (sim) return trace::Component::Simulator;
        if (ret) return trace::Component::Retrieval;
        return trace::Component::Strategy;
      }
      request.messages.push_back({llm::Role::Assistant, reply});
      request.messages.push_back(
          {llm::Role::User,
           "Respond with exactly one token: SIMULATOR, RETRIEVAL, or STRATEGY."});
    }
  }
  log(trace::Step::Thought, trace::Component::Driver,
      {{"kind", "chooser_fallback"}, {"chosen", trace::to_string(fallback)}});
  return fallback;
}

DriverState Driver::run_dynamic() {
  // Cost parity with fixed mode: at most 3 component calls per iteration.
  const int budget = 3 * config_.policy.max_iterations;
  static const trace::Component rotation[] = {trace::Component::Simulator,
                                              trace::Component::Retrieval,
                                              trace::Component::Strategy};
  int rotation_index = 0;
  for (int calls = 0; calls < budget; ++calls) {
    *iteration_cell_ = state_.iteration + 1;
    const trace::Component choice = choose_next_component(rotation[rotation_index % 3]);
    ++rotation_index;
    switch (choice) {
      case trace::Component::Simulator: step_simulator(); break;
      case trace::Component::Retrieval: step_retrieval(); break;
      case trace::Component::Strategy: {
        const bool produced = step_strategy();
        if (produced) {
          state_.iteration = current_iteration();
          const StopDecision decision =
              check_stop(state_, config_.policy, config_.stop_on_stabilize);
          if (decision.stop) {
            log(trace::Step::Thought, trace::Component::Driver,
                {{"kind", "stop"}, {"reason", to_string(decision.reason)}});
            return state_;
          }
        }
        break;
      }
      default: break;
    }
  }
  if (state_.ddx_history.empty()) {
    // The budget ran out without a diagnosis; force one final strategy call.
    *iteration_cell_ = state_.iteration + 1;
    log(trace::Step::Thought, trace::Component::Driver,
        {{"kind", "forced_strategy"},
         {"text", "Budget exhausted without a diagnosis; forcing a final strategy call."}});
    step_strategy();
    state_.iteration = current_iteration();
  }
  if (state_.ddx_history.empty()) {
    throw Error(ErrorCode::CaseFailure, "dynamic run produced no differential diagnosis");
  }
  log(trace::Step::Thought, trace::Component::Driver,
      {{"kind", "stop"}, {"reason", "budget_exhausted"}});
  return state_;
}

}  // namespace ddx::driver
