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

#include <memory>

#include "ddx/history_taking.hpp"

using namespace ddx;
using namespace ddx::history;

namespace {

const prompts::PromptLibrary& lib() {
  static const prompts::PromptLibrary library = prompts::PromptLibrary::builtin();
  return library;
}

llm::ChatClient scripted_client(std::shared_ptr<llm::ScriptedChatBackend> backend) {
  return llm::ChatClient(std::move(backend), llm::RetryPolicy{1, std::chrono::milliseconds(1)},
                         "scripted", [](std::chrono::milliseconds) {});
}

DoctorAgent scripted_doctor(std::vector<std::string> responses) {
  auto backend = std::make_shared<llm::ScriptedChatBackend>("");
  backend->add_rule({"Your job is to take the medical history", std::nullopt,
                     std::move(responses)});
  return DoctorAgent(scripted_client(backend), lib());
}

}  // namespace

TEST_CASE("doctor returns scripted question or end signal") {
  DoctorAgent doctor = scripted_doctor({"Do you have a fever?", kEndToken});
  DialogueSession session;
  auto q1 = doctor.next_question(session, std::nullopt, {});
  REQUIRE(q1.has_value());
  CHECK(*q1 == "Do you have a fever?");
  auto q2 = doctor.next_question(session, std::nullopt, {});
  CHECK_FALSE(q2.has_value());
}

TEST_CASE("oracle patient answers strictly from the profile") {
  OraclePatient patient(PatientSimState{
      {"I have a fever", "I do not have a cough", "The pain is located in the right ear"},
      std::nullopt});
  DialogueSession session;

  CHECK(patient.answer("Do you have a fever?", session) == "Yes.");
  CHECK(patient.answer("Do you have a cough?", session) == "No.");
  CHECK(patient.answer("Any chest pain?", session) == "I don't know.");
  CHECK(patient.answer("Do you have ear pain?", session) == "Yes.");

  try {
    patient.answer("   ", session);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("oracle patient never asserts facts absent from the profile") {
  const std::vector<std::string> profile = {"I have a fever", "I have nasal congestion",
                                            "I do not have a cough"};
  OraclePatient patient(PatientSimState{profile, std::nullopt});
  DialogueSession session;
  const std::vector<std::string> probes = {
      "Do you have a fever?",      "Do you have chest pain?", "Do you have a rash?",
      "Do you have night sweats?", "Any nasal congestion?",   "Do you have a cough?",
      "Have you traveled recently?"};
  for (const auto& q : probes) {
    const std::string a = patient.answer(q, session);
    CHECK((a == "Yes." || a == "No." || a == "I don't know."));
    if (a == "Yes." || a == "No.") {
      // a definite answer requires a profile fact covering the question
      bool covered = false;
      for (const auto& fact : profile) {
        const std::string nf = normalize_text(fact);
        const std::string nq = normalize_text(q);
        if (nq.find("fever") != std::string::npos && nf.find("fever") != std::string::npos)
          covered = true;
        if (nq.find("congestion") != std::string::npos &&
            nf.find("congestion") != std::string::npos)
          covered = true;
        if (nq.find("cough") != std::string::npos && nf.find("cough") != std::string::npos)
          covered = true;
      }
      CHECK(covered);
    }
  }
}

TEST_CASE("run_dialogue enforces the question budget") {
  DoctorAgent doctor = scripted_doctor({"Do you have a fever?"});  // repeats forever
  OraclePatient patient(PatientSimState{{"I have a fever"}, std::nullopt});

  const DialogueSession session = run_dialogue(doctor, patient, std::nullopt, {}, 5);
  CHECK(session.doctor_turns() == 5);
  CHECK(session.turns.size() == 10);
  CHECK(session.ended_by == DialogueEnd::MaxQuestions);
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    CHECK(session.turns[i].speaker == (i % 2 == 0 ? Speaker::Doctor : Speaker::Patient));
    CHECK(session.turns[i].turn_index == static_cast<int>(i));
  }
}

TEST_CASE("run_dialogue boundary and end-signal cases") {
  {
    DoctorAgent doctor = scripted_doctor({"Q1?"});
    OraclePatient patient(PatientSimState{{"irrelevant"}, std::nullopt});
    const auto session = run_dialogue(doctor, patient, std::nullopt, {}, 1);
    CHECK(session.doctor_turns() == 1);
  }
  {
    DoctorAgent doctor = scripted_doctor({"Q1?", "Q2?", kEndToken});
    OraclePatient patient(PatientSimState{{"irrelevant"}, std::nullopt});
    const auto session = run_dialogue(doctor, patient, std::nullopt, {}, 5);
    CHECK(session.doctor_turns() == 2);
    CHECK(session.ended_by == DialogueEnd::DoctorEnded);
  }
  {
    // end signal with goals supplied counts as the goals being met
    DoctorAgent doctor = scripted_doctor({"Q1?", kEndToken});
    OraclePatient patient(PatientSimState{{"irrelevant"}, std::nullopt});
    const auto session =
        run_dialogue(doctor, patient, std::nullopt, {"cover the fever history"}, 5);
    CHECK(session.ended_by == DialogueEnd::GoalsMet);
  }
  CHECK_THROWS_AS(
      [] {
        DoctorAgent doctor = scripted_doctor({"Q?"});
        OraclePatient patient(PatientSimState{{"x"}, std::nullopt});
        run_dialogue(doctor, patient, std::nullopt, {}, 0);
      }(),
      Error);
}

TEST_CASE("llm patient renders profile and question into the prompt") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>("I don't know.");
  backend->add_rule({"Doctor: Do you have a fever?", std::nullopt, {"Yes."}});
  LlmPatient patient(scripted_client(backend), lib(),
                     PatientSimState{{"I have a fever"}, std::nullopt});
  DialogueSession session;
  CHECK(patient.answer("Do you have a fever?", session) == "Yes.");
  CHECK(patient.answer("Anything else?", session) == "I don't know.");
  CHECK_THROWS_AS(patient.answer("", session), Error);
}

TEST_CASE("extract_profile_facts templates informative answers") {
  DialogueSession session;
  session.turns = {{Speaker::Doctor, "Do you have a fever?", 0},
                   {Speaker::Patient, "Yes", 1}};
  CHECK(extract_profile_facts(session) == std::vector<std::string>{"Has fever: yes"});

  DialogueSession unknown;
  unknown.turns = {{Speaker::Doctor, "Any chest pain?", 0},
                   {Speaker::Patient, "I don't know.", 1}};
  CHECK(extract_profile_facts(unknown).empty());

  DialogueSession mixed;
  mixed.turns = {{Speaker::Doctor, "Do you have a fever?", 0},
                 {Speaker::Patient, "Yes.", 1},
                 {Speaker::Doctor, "Do you have a cough?", 2},
                 {Speaker::Patient, "I don't know.", 3},
                 {Speaker::Doctor, "Are you short of breath?", 4},
                 {Speaker::Patient, "No.", 5}};
  const auto facts = extract_profile_facts(mixed);
  REQUIRE(facts.size() == 2);
  CHECK(facts[0] == "Has fever: yes");
  CHECK(facts[1] == "Is short of breath: no");
}

TEST_CASE("extracted fact count never exceeds patient turns") {
  DoctorAgent doctor =
      scripted_doctor({"Do you have a fever?", "Do you have a cough?", "Any rash?"});
  OraclePatient patient(PatientSimState{{"I have a fever"}, std::nullopt});
  for (int budget = 1; budget <= 3; ++budget) {
    const auto session = run_dialogue(doctor, patient, std::nullopt, {}, budget);
    const auto facts = extract_profile_facts(session);
    CHECK(facts.size() <= static_cast<std::size_t>(session.turns.size() / 2));
  }
}
