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
#include "ddx/history_taking.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace ddx::history {

namespace {

std::string or_none(const std::string& text) { return text.empty() ? "None." : text; }

std::string render_goals(const std::vector<std::string>& goals) {
  std::string out;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (i) out.push_back('\n');
    out += "- " + goals[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string to_string(Speaker speaker) {
  return speaker == Speaker::Doctor ? "Doctor" : "Patient";
}

std::string to_string(DialogueEnd end) {
  switch (end) {
    case DialogueEnd::MaxQuestions: return "max_questions";
    case DialogueEnd::DoctorEnded: return "doctor_ended";
    case DialogueEnd::GoalsMet: return "goals_met";
  }
  return "unknown";
}

int DialogueSession::doctor_turns() const {
  return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const DialogueTurn& t) {
    return t.speaker == Speaker::Doctor;
  }));
}

std::string DialogueSession::transcript() const {
  std::string out;
  for (const auto& turn : turns) {
    if (!out.empty()) out.push_back('\n');
    out += to_string(turn.speaker) + ": " + turn.text;
  }
  return out;
}

DoctorAgent::DoctorAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts)
    : chat_(std::move(chat)),
      template_text_(prompts.text("doctor")),
      preface_(prompts.text("specialist_preface")) {}

std::optional<std::string> DoctorAgent::next_question(
    const DialogueSession& history, const std::optional<InitialInfo>& initial,
    const std::vector<std::string>& goals) {
  const std::string prompt = prompts::render_template(
      template_text_,
      {{"PREFACE", preface_},
       {"END_TOKEN", kEndToken},
       {"INITIAL_INFO", initial ? initial->to_text() : "None."},
       {"DIALOGUE_HISTORY", or_none(history.transcript())},
       {"GOALS", or_none(render_goals(goals))}});

  llm::ChatRequest request;
  request.messages.push_back({llm::Role::User, prompt});

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply;
    try {
      reply = trim(chat_.complete(request));
    } catch (const Error& e) {
      throw Error(ErrorCode::SimulatorError, std::string("doctor backend: ") + e.what());
    }
    if (reply.find(kEndToken) != std::string::npos) return std::nullopt;
    if (!reply.empty()) return reply;
    request.messages.push_back({llm::Role::Assistant, reply});
    request.messages.push_back(
        {llm::Role::User, "Your reply was empty. Ask one question or respond with " +
                              std::string(kEndToken) + "."});
  }
  throw Error(ErrorCode::SimulatorError, "doctor produced no usable question");
}

LlmPatient::LlmPatient(llm::ChatClient chat, const prompts::PromptLibrary& prompts,
                       PatientSimState state)
    : chat_(std::move(chat)),
      template_text_(prompts.text("patient")),
      state_(std::move(state)) {}

std::string LlmPatient::answer(const std::string& question, const DialogueSession& history) {
  if (trim(question).empty()) {
    throw Error(ErrorCode::InvalidArgument, "patient asked an empty question");
  }
  std::string profile;
  for (const auto& fact : state_.full_profile) {
    if (!profile.empty()) profile.push_back('\n');
    profile += "- " + fact;
  }
  const std::string prompt = prompts::render_template(
      template_text_,
      {{"PATIENT_PROFILE", profile},
       {"INITIAL_INFO", state_.initial_info ? state_.initial_info->to_text() : "None."},
       {"DIALOGUE_HISTORY", or_none(history.transcript())},
       {"QUESTION", question}});
  llm::ChatRequest request;
  request.messages.push_back({llm::Role::User, prompt});
  try {
    return trim(chat_.complete(request));
  } catch (const Error& e) {
    throw Error(ErrorCode::SimulatorError, std::string("patient backend: ") + e.what());
  }
}

OraclePatient::OraclePatient(PatientSimState state) : state_(std::move(state)) {}

namespace {

const std::set<std::string>& stop_words() {
  static const std::set<std::string> words = {
      "do",    "you",  "have",  "having", "had",   "any",  "a",     "an",   "the",
      "is",    "are",  "there", "your",   "of",    "or",   "does",  "did",
      "been",  "ever", "feel",  "feeling", "felt", "experiencing",
      "experience", "experienced", "notice", "noticed", "currently", "recently",
      "please", "tell", "me", "about", "what", "how", "many", "much", "with",
      "suffer", "suffering", "from", "in", "on", "at", "to"};
  return words;
}

const std::vector<std::string>& negation_markers() {
  static const std::vector<std::string> markers = {
      "no ", "not ", "never ", "without ", "denies ", "deny ", "don't ", "do not ",
      "does not ", "doesn't ", "negative for "};
  return markers;
}

std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : normalize_text(text)) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(ch);
    } else if (!current.empty()) {
      if (!stop_words().count(current)) tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty() && !stop_words().count(current)) tokens.push_back(current);
  return tokens;
}

bool fact_is_negated(const std::string& normalized_fact) {
  for (const auto& marker : negation_markers()) {
    if (normalized_fact.find(marker) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::string OraclePatient::answer(const std::string& question, const DialogueSession&) {
  if (trim(question).empty()) {
    throw Error(ErrorCode::InvalidArgument, "patient asked an empty question");
  }
  const std::vector<std::string> query = content_tokens(question);
  if (query.empty()) return "I don't know.";

  for (const auto& fact : state_.full_profile) {
    const std::string normalized = normalize_text(fact);
    const std::vector<std::string> fact_tokens = content_tokens(fact);
    bool all_present = true;
    for (const auto& token : query) {
      if (std::find(fact_tokens.begin(), fact_tokens.end(), token) == fact_tokens.end()) {
        all_present = false;
        break;
      }
    }
    if (!all_present) continue;
    return fact_is_negated(normalized) ? "No." : "Yes.";
  }
  return "I don't know.";
}

DialogueSession run_dialogue(DoctorAgent& doctor, PatientSim& patient,
                             const std::optional<InitialInfo>& initial,
                             const std::vector<std::string>& goals, int max_questions,
                             DialogueSession* partial_out) {
  if (max_questions < 1) {
    throw Error(ErrorCode::InvalidArgument, "run_dialogue: max_questions must be >= 1");
  }
  DialogueSession session;
  session.max_questions = max_questions;
  session.goals = goals;
  session.ended_by = DialogueEnd::MaxQuestions;

  int index = 0;
  try {
    while (session.doctor_turns() < max_questions) {
      auto question = doctor.next_question(session, initial, goals);
      if (!question) {
        // End-signal with goals supplied reads as the goals being achieved.
        session.ended_by = goals.empty() ? DialogueEnd::DoctorEnded : DialogueEnd::GoalsMet;
        return session;
      }
      session.turns.push_back({Speaker::Doctor, *question, index++});
      std::string reply = patient.answer(*question, session);
      session.turns.push_back({Speaker::Patient, reply, index++});
    }
  } catch (const Error&) {
    if (partial_out) *partial_out = session;
    throw;
  }
  session.ended_by = DialogueEnd::MaxQuestions;
  return session;
}

namespace {

bool is_dont_know(const std::string& answer) {
  const std::string n = normalize_text(answer);
  return n.rfind("i don't know", 0) == 0 || n.rfind("i dont know", 0) == 0;
}

// "Do you have a fever?" -> "Has fever". Falls back to the question text.
std::string question_stem(const std::string& question) {
  std::string q = trim(question);
  while (!q.empty() && (q.back() == '?' || q.back() == '.' || q.back() == '!')) q.pop_back();
  std::string lower = normalize_text(q);

  struct Pattern {
    const char* prefix;
    const char* replacement;
  };
  static const Pattern patterns[] = {
      {"do you have any ", "Has "}, {"do you have a ", "Has "},
      {"do you have an ", "Has "},  {"do you have ", "Has "},
      {"have you ever ", "Has "},   {"have you been ", "Has been "},
      {"have you ", "Has "},        {"are you ", "Is "},
      {"is there any ", "Has "},    {"is there ", "Has "},
      {"any ", "Has "},             {"does your ", "Has "},
      {"did you ", "Has "},
  };
  for (const auto& p : patterns) {
    const std::string prefix(p.prefix);
    if (lower.rfind(prefix, 0) == 0 && lower.size() > prefix.size()) {
      return std::string(p.replacement) + lower.substr(prefix.size());
    }
  }
  return q;
}

std::string answer_value(const std::string& answer) {
  const std::string n = normalize_text(answer);
  if (n.rfind("yes", 0) == 0) return "yes";
  if (n.rfind("no", 0) == 0 && n.rfind("not sure", 0) != 0) return "no";
  std::string a = trim(answer);
  while (!a.empty() && a.back() == '.') a.pop_back();
  return a;
}

}  // namespace

std::vector<std::string> extract_profile_facts(const DialogueSession& session) {
  std::vector<std::string> facts;
  for (std::size_t i = 0; i + 1 < session.turns.size(); ++i) {
    const auto& q = session.turns[i];
    const auto& a = session.turns[i + 1];
    if (q.speaker != Speaker::Doctor || a.speaker != Speaker::Patient) continue;
    if (is_dont_know(a.text)) continue;
    const std::string value = answer_value(a.text);
    if (value.empty()) continue;
    facts.push_back(question_stem(q.text) + ": " + value);
  }
  return facts;
}

}  // namespace ddx::history
