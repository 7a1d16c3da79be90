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
#include <memory>

#include "ddx/orchestrator.hpp"

using namespace ddx;
using namespace ddx::driver;

namespace {

const prompts::PromptLibrary& lib() {
  static const prompts::PromptLibrary library = prompts::PromptLibrary::builtin();
  return library;
}

llm::ChatClient scripted_client(std::shared_ptr<llm::ScriptedChatBackend> backend) {
  return llm::ChatClient(std::move(backend), llm::RetryPolicy{1, std::chrono::milliseconds(1)},
                         "scripted", [](std::chrono::milliseconds) {});
}

PatientCase toy_case() {
  PatientCase c;
  c.case_id = "toy-1";
  c.dataset = Dataset::DDxPlus;
  c.initial_info = InitialInfo{41, "F", "nasal congestion"};
  c.full_profile = {"I have a fever", "I have ear pain"};
  c.diagnosis_options = {"Acute otitis media", "URTI", "Bronchitis", "Pericarditis"};
  c.ground_truth = "Acute otitis media";
  return c;
}

history::DialogueSession fake_session(int questions) {
  history::DialogueSession session;
  session.max_questions = questions;
  int index = 0;
  for (int q = 0; q < questions; ++q) {
    session.turns.push_back({history::Speaker::Doctor, "Q" + std::to_string(q) + "?", index++});
    session.turns.push_back({history::Speaker::Patient, "Yes.", index++});
  }
  session.ended_by = history::DialogueEnd::MaxQuestions;
  return session;
}

Components fake_components(std::vector<std::string> ddx_entries = {"URTI", "Bronchitis"}) {
  Components components;
  components.simulator = [](const PatientProfile&, const std::optional<InitialInfo>&,
                            const std::vector<std::string>&, int max_questions) {
    return fake_session(std::min(max_questions, 2));
  };
  components.retrieval = [](const retrieval::SearchQuery& query) {
    return retrieval::EvidenceSummary{"no external evidence", {}, query};
  };
  components.strategy = [entries = std::move(ddx_entries)](const StrategyRequest&) {
    return RankedDifferential{entries, 1};
  };
  return components;
}

struct TraceFixture {
  std::filesystem::path dir;
  explicit TraceFixture(const std::string& name) {
    dir = std::filesystem::temp_directory_path() / ("ddxflow_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  trace::TraceFile read(const std::string& case_id) const {
    return trace::read_trace_file(dir / (case_id + ".trace.jsonl"));
  }
};

}  // namespace

TEST_CASE("merge_facts deduplicates and never shrinks the profile") {
  PatientProfile profile;
  CHECK(merge_facts(profile, {"has fever: yes"}, FactSource::Dialogue) == 1);
  CHECK(merge_facts(profile, {"has fever: yes"}, FactSource::Dialogue) == 0);
  CHECK(profile.size() == 1);
  CHECK(merge_facts(profile, {}, FactSource::Dialogue) == 0);
  CHECK(profile.size() == 1);
  CHECK(merge_facts(profile, {"a", "b", "has fever: yes"}, FactSource::Dialogue) == 2);
  CHECK(profile.size() == 3);
}

TEST_CASE("check_stop covers max iterations, stabilization, and continue") {
  IterationPolicy policy{PolicyKind::Fixed, 3, 5};
  DriverState state;
  state.iteration = 3;
  CHECK(check_stop(state, policy, false).stop);
  CHECK(check_stop(state, policy, false).reason == StopReason::MaxIterations);

  DriverState stable;
  stable.iteration = 2;
  stable.ddx_history = {RankedDifferential{{"A", "B"}, 1}, RankedDifferential{{"a", "B"}, 2}};
  CHECK(check_stop(stable, policy, true).stop);
  CHECK(check_stop(stable, policy, true).reason == StopReason::Stabilized);
  CHECK_FALSE(check_stop(stable, policy, false).stop);

  DriverState moving;
  moving.iteration = 2;
  moving.ddx_history = {RankedDifferential{{"A", "B", "C", "D"}, 1},
                        RankedDifferential{{"A", "B", "C", "E"}, 2}};
  CHECK_FALSE(check_stop(moving, policy, true).stop);
}

TEST_CASE("parse_instruction_list accepts numbered and bulleted lines") {
  const auto items = parse_instruction_list(
      "Here you go:\n1. First\n2) Second\n- Third\n* Fourth\nnot a list line");
  CHECK(items == std::vector<std::string>{"First", "Second", "Third", "Fourth"});
  CHECK(parse_instruction_list("free text only").empty());
}

TEST_CASE("build_agent_instruction truncates to ten items") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>("");
  std::string twelve;
  for (int i = 1; i <= 12; ++i) twelve += std::to_string(i) + ". item " + std::to_string(i) + "\n";
  backend->add_rule({"Instruction list:", std::nullopt, {twelve}});

  DriverConfig config;
  config.instruction_mode = InstructionMode::Llm;
  Driver driver(toy_case(), config, fake_components(), nullptr, nullptr,
                scripted_client(backend), lib());
  const auto instruction = driver.build_agent_instruction(trace::Component::Simulator);
  CHECK(instruction.items.size() == 10);
  CHECK_FALSE(instruction.from_fallback);
}

TEST_CASE("build_agent_instruction falls back to defaults after scripted garbage") {
  TraceFixture fx("instr_fallback");
  auto backend = std::make_shared<llm::ScriptedChatBackend>("garbage with no list");
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "x"}}, clock);

  DriverConfig config;
  config.instruction_mode = InstructionMode::Llm;
  Driver driver(toy_case(), config, fake_components(), &writer, nullptr,
                scripted_client(backend), lib());
  const auto instruction = driver.build_agent_instruction(trace::Component::Retrieval);
  CHECK(instruction.from_fallback);
  CHECK_FALSE(instruction.items.empty());
  CHECK(backend->call_count() == 2);  // one re-prompt before the fallback
  writer.close();

  bool fallback_logged = false;
  for (const auto& event : fx.read("toy-1").events) {
    if (event.payload.value("kind", "") == "instruction_fallback") fallback_logged = true;
  }
  CHECK(fallback_logged);
}

TEST_CASE("retrieval instruction prompt carries the provisional differential") {
  TraceFixture fx("instr_prompt");
  auto backend = std::make_shared<llm::ScriptedChatBackend>("1. Search for Fabry disease.");
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "x"}}, clock);
  auto cell = std::make_shared<int>(0);

  llm::ChatClient driver_chat = scripted_client(backend);
  driver_chat.set_observer(writer.chat_observer(trace::Component::Driver, cell.get()));

  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 1, 2};
  config.instruction_mode = InstructionMode::Llm;
  Driver driver(toy_case(), config, fake_components({"Pericarditis", "URTI"}), &writer, cell,
                std::move(driver_chat), lib());
  driver.run();
  (void)driver.build_agent_instruction(trace::Component::Retrieval);
  writer.close();

  // the last driver chat request must include the previous differential
  std::string last_driver_prompt;
  for (const auto& event : fx.read("toy-1").events) {
    if (event.component == trace::Component::Driver &&
        event.payload.value("kind", "") == "chat_request") {
      const auto& messages = event.payload.at("request").at("messages");
      last_driver_prompt = messages.back().value("content", "");
    }
  }
  CHECK(last_driver_prompt.find("Pericarditis") != std::string::npos);
  CHECK(last_driver_prompt.find("1. Pericarditis\n2. URTI") != std::string::npos);
}

TEST_CASE("fixed iteration runs simulator, retrieval, strategy in order each cycle") {
  TraceFixture fx("fixed_loop");
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "acute otitis media"}}, clock);
  auto cell = std::make_shared<int>(0);

  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 3, 5};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), &writer, cell, {}, lib());
  const DriverState state = driver.run();
  writer.close();

  CHECK(state.iteration == 3);
  CHECK(state.ddx_history.size() == 3);
  for (std::size_t i = 0; i < state.ddx_history.size(); ++i) {
    CHECK(state.ddx_history[i].produced_at_iteration == static_cast<int>(i) + 1);
  }
  CHECK(state.dialogue_log.size() == 3);
  CHECK(state.evidence_cache.size() == 3);

  const auto file = fx.read("toy-1");
  for (int iteration = 1; iteration <= 3; ++iteration) {
    std::vector<std::string> dispatches;
    for (const auto& event : file.events) {
      if (event.iteration == iteration && event.step == trace::Step::Action &&
          event.payload.value("kind", "") == "dispatch") {
        dispatches.push_back(trace::to_string(event.component));
      }
    }
    CHECK(dispatches == std::vector<std::string>{"simulator", "retrieval", "strategy"});
  }
}

TEST_CASE("every action event is followed by an observation for the same component") {
  TraceFixture fx("action_obs");
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "x"}}, clock);
  auto cell = std::make_shared<int>(0);
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 2, 3};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), &writer, cell, {}, lib());
  driver.run();
  writer.close();

  const auto file = fx.read("toy-1");
  for (std::size_t i = 0; i < file.events.size(); ++i) {
    if (file.events[i].step != trace::Step::Action) continue;
    bool observed = false;
    for (std::size_t j = i + 1; j < file.events.size(); ++j) {
      if (file.events[j].step == trace::Step::Observation &&
          file.events[j].component == file.events[i].component) {
        observed = true;
        break;
      }
    }
    CHECK(observed);
  }
}

TEST_CASE("single iteration produces one differential") {
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 1, 5};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), nullptr, nullptr, {}, lib());
  CHECK(driver.run().ddx_history.size() == 1);
}

TEST_CASE("stabilization stop halts before max iterations") {
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 3, 5};
  config.stop_on_stabilize = true;
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components({"URTI", "Bronchitis"}), nullptr, nullptr,
                {}, lib());
  const DriverState state = driver.run();
  CHECK(state.ddx_history.size() == 2);  // identical consecutive lists
}

TEST_CASE("strategy failure with no earlier differential is a case failure") {
  Components components = fake_components();
  components.strategy = [](const StrategyRequest&) -> RankedDifferential {
    throw Error(ErrorCode::StrategyError, "always fails");
  };
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 2, 2};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, std::move(components), nullptr, nullptr, {}, lib());
  try {
    driver.run();
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CaseFailure);
  }
}

TEST_CASE("component errors degrade the step but the run continues") {
  Components components = fake_components();
  components.retrieval = [](const retrieval::SearchQuery&) -> retrieval::EvidenceSummary {
    throw Error(ErrorCode::RetrievalError, "retrieval down");
  };
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 2, 2};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, std::move(components), nullptr, nullptr, {}, lib());
  const DriverState state = driver.run();
  CHECK(state.ddx_history.size() == 2);
  CHECK(state.evidence_cache.empty());
}

TEST_CASE("dynamic iteration forces a final strategy call when starved") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>("SIMULATOR");
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Dynamic, 2, 2};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), nullptr, nullptr,
                scripted_client(backend), lib());
  const DriverState state = driver.run();
  CHECK(state.ddx_history.size() == 1);        // forced final diagnosis
  CHECK(state.dialogue_log.size() == 6);       // budget = 3 * max_iterations
}

TEST_CASE("dynamic iteration with scripted chooser mirrors the fixed order") {
  TraceFixture fx("dynamic_order");
  auto backend = std::make_shared<llm::ScriptedChatBackend>("");
  backend->add_rule({"Respond with exactly one token", std::nullopt,
                     {"SIMULATOR", "RETRIEVAL", "STRATEGY", "SIMULATOR", "RETRIEVAL",
                      "STRATEGY"}});
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "x"}}, clock);
  auto cell = std::make_shared<int>(0);
  llm::ChatClient chooser = scripted_client(backend);
  chooser.set_observer(writer.chat_observer(trace::Component::Driver, cell.get()));

  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Dynamic, 2, 2};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), &writer, cell, std::move(chooser),
                lib());
  const DriverState state = driver.run();
  writer.close();

  CHECK(state.ddx_history.size() == 2);
  std::vector<std::string> dispatches;
  for (const auto& event : fx.read("toy-1").events) {
    if (event.step == trace::Step::Action && event.payload.value("kind", "") == "dispatch") {
      dispatches.push_back(trace::to_string(event.component));
    }
  }
  CHECK(dispatches == std::vector<std::string>{"simulator", "retrieval", "strategy",
                                               "simulator", "retrieval", "strategy"});
}

TEST_CASE("unrecognized chooser output falls back to the fixed rotation") {
  TraceFixture fx("chooser_fallback");
  auto backend = std::make_shared<llm::ScriptedChatBackend>("FLUX CAPACITOR");
  auto clock = std::make_shared<trace::LogicalClock>();
  trace::TraceWriter writer(fx.dir, "toy-1", {{"ground_truth", "x"}}, clock);
  auto cell = std::make_shared<int>(0);

  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Dynamic, 1, 2};
  config.instruction_mode = InstructionMode::Defaults;
  Driver driver(toy_case(), config, fake_components(), &writer, cell,
                scripted_client(backend), lib());
  const DriverState state = driver.run();
  writer.close();

  CHECK(state.ddx_history.size() == 1);  // rotation executes Sim, Ret, Strat
  int fallbacks = 0;
  for (const auto& event : fx.read("toy-1").events) {
    if (event.payload.value("kind", "") == "chooser_fallback") ++fallbacks;
  }
  CHECK(fallbacks == 3);
}

TEST_CASE("profile starts from initial info only, never the hidden profile") {
  DriverConfig config;
  config.policy = IterationPolicy{PolicyKind::Fixed, 1, 1};
  config.instruction_mode = InstructionMode::Defaults;
  Components components = fake_components();
  components.simulator = [](const PatientProfile& known, const std::optional<InitialInfo>&,
                            const std::vector<std::string>&, int) {
    // at the first iteration the driver only knows the initial info
    CHECK(known.size() == 3);
    CHECK(known.contains("Age: 41"));
    CHECK(known.contains("Sex: F"));
    CHECK(known.contains("Chief complaint: nasal congestion"));
    CHECK_FALSE(known.contains("I have a fever"));
    return fake_session(1);
  };
  Driver driver(toy_case(), config, std::move(components), nullptr, nullptr, {}, lib());
  driver.run();
}
