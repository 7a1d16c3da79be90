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
#include "ddx/prompts.hpp"

#include <fstream>
#include <sstream>

#include "ddx/errors.hpp"

namespace ddx::prompts {

namespace {

constexpr const char* k_specialist_preface = R"RAW(You are an experienced physician with broad clinical knowledge across internal medicine, dermatology, and rare diseases.)RAW";

constexpr const char* k_doctor = R"RAW(<PREFACE>

Your job is to take the medical history of a patient by asking them specific questions about their symptoms and antecedents, narrowing down the possible diseases they may be suffering from.

You may receive additional information to guide your dialogue:
- Initial Patient Information: facts the patient has already self-reported, such as chief complaint, age, or sex.
- Dialogue History: the conversation you and the patient have had so far, formatted as 'Doctor' / 'Patient' turns.
- Suggested Conversation Goals: specific topics or questions to try to cover in the dialogue. You may also ask questions outside of these conversation goals; do not limit yourself to these.

Response instructions:
- Ask exactly one question per turn, phrased directly to the patient.
- Do not repeat a question that has already been answered.
- When you believe the history is complete, respond with the single line <END_TOKEN> and nothing else.
- Otherwise respond with the question only, without numbering or commentary.

Initial Patient Information:
<INITIAL_INFO>

Dialogue History:
<DIALOGUE_HISTORY>

Suggested Conversation Goals:
<GOALS>

Doctor:)RAW";

constexpr const char* k_patient = R"RAW(Act as a patient with the patient profile below engaging in a medical history taking with a doctor.

You may receive additional information to guide your dialogue:
- Initial Patient Information: facts you as the patient have already self-reported to the doctor, such as chief complaint, age, or sex.
- Dialogue History: the conversation you and the doctor have had so far, formatted as 'Doctor' / 'Patient' turns.

When asked for information which is explicitly present in your patient profile (including as synonyms), respond:
- Positively ("Yes"...) if your patient profile explicitly indicates you have this antecedent/symptom.
- Negatively ("No"...) if your patient profile explicitly indicates that you do not have this antecedent/symptom.

When asked for information which is not explicitly mentioned in your patient profile (including as synonyms), respond "I don't know."

Response instructions:
- Answer in one short sentence, as the patient, with no extra commentary.
- Never mention information that is absent from your patient profile.

Patient Profile:
<PATIENT_PROFILE>

Initial Patient Information:
<INITIAL_INFO>

Dialogue History:
<DIALOGUE_HISTORY>

Doctor: <QUESTION>
Patient:)RAW";

constexpr const char* k_keywords = R"RAW(Your job is to assist in the creation of a differential diagnosis for a patient by searching for relevant medical information online. Given an input search from a user, break it up into a list of simplified keyword searches to find relevant medical information online.

Follow these steps:
1. Identify the distinct medical concepts in the input search.
2. Turn each concept into a short keyword search of one to four words.
3. Output at most <MAX_KEYWORDS> keyword searches.

Respond with the keyword searches as a single bracketed, comma-separated list and nothing else.

Format example:
Input search:
recurrent fever with joint pain in an adult
Keyword searches list:
[recurrent fever causes, joint pain differential]

Input search:
<INPUT_SEARCH>

Keyword searches list:)RAW";

constexpr const char* k_synthesis = R"RAW(You are a helpful research assistant to a doctor creating a differential diagnosis of a patient. Concisely answer the doctor's input search by analyzing and summarizing the relevant medical content in the search results.

Inputs:
1. Doctor's Input Search: the search the doctor requested. This search may contain multiple topics.
2. Search Results: the fetched documents. You may only answer based on topics present in these search results.
3. Diagnosis Options (optional): the possible diseases the patient may be suffering from. If provided, use this exact terminology to refer to the diseases.

Response instructions:
- Write a concise evidence summary of at most two paragraphs, grounded only in the search results.
- Do not state findings that are not supported by the search results.

Doctor's Input Search:
<INPUT_SEARCH>

Search Results:
<SEARCH_RESULTS>

Diagnosis Options:
<DIAGNOSIS_OPTIONS>

Evidence summary:)RAW";

constexpr const char* k_diagnosis = R"RAW(<PREFACE>

Given a patient's profile (a list of antecedents and symptoms), provide a ranked differential diagnosis of the <DDX_LENGTH> most likely diseases. You may be provided a list of diagnosis options you can choose from. You must use this exact disease terminology when referring to the diseases. If you aren't provided the diagnosis options, consider all possible diseases.

Your ranked differential diagnosis should have the possible diseases ranked from most likely to least likely.

You will also be provided with:
1. Previous Ranked Differential Diagnoses: ranked lists produced in earlier iterations; refine them with the new information.
2. Suggested Diagnosis Instructions (optional): specific guidance for this diagnosis.
3. Previous Search Content (optional): summarized external medical evidence.
4. Patient Profile: the known symptoms/antecedents of the patient.
5. Patient Examples (optional): reference patient cases with their diagnoses.

<REASONING_DIRECTIVE>

Previous Ranked Differential Diagnoses:
<PREVIOUS_DDX>

Suggested Diagnosis Instructions:
<INSTRUCTIONS>

Previous Search Content:
<EVIDENCE>

Diagnosis Options:
<DIAGNOSIS_OPTIONS>

Patient Profile:
<PATIENT_PROFILE>

Patient Examples:
<EXAMPLES>

Directly provide the ranked differential diagnosis of the <DDX_LENGTH> most likely diseases for the patient in the following format (without additional text before or after), with one diagnosis per line (replace [DIAGNOSIS_X] with the actual diagnosis name, and do not include the brackets themselves):
1. [DIAGNOSIS_1]
2. [DIAGNOSIS_2]
...)RAW";

constexpr const char* k_driver_instruction = R"RAW(Your job is to facilitate the process of differential diagnosis of a patient by concisely prompting medical agents.

You will be provided with:
1) Agent Description. This includes:
   a) Agent Function: a description of the function of the medical agent.
   b) Agent Prompt: a description of how to prompt the agent.
2) Available Information: the information you can extract from to prompt the agent. Do not invent new information.

Follow these steps to create a prompt for the medical agent:
1. Analyze the description of the medical agent and its input prompt.
2. Review the current information you were provided and determine how it can help the agent.
3. Design an instruction list for this agent: at most <MAX_ITEMS> short numbered items, each a concrete instruction or topic grounded in the available information.
4. Respond with the numbered instruction list, nothing else.

Agent Function:
<AGENT_FUNCTION>

Agent Prompt:
<AGENT_PROMPT_GUIDE>

Available Information:
<AVAILABLE_INFO>

Instruction list:)RAW";

constexpr const char* k_driver_chooser = R"RAW(Your job is to facilitate the process of differential diagnosis of a patient by choosing which component to run next.

Components:
- SIMULATOR: runs a history-taking dialogue with the patient to gather new symptoms and antecedents.
- RETRIEVAL: searches external medical sources and summarizes evidence about candidate diseases.
- STRATEGY: produces a new ranked differential diagnosis from the current information.

Review the available information and choose the component whose output would most improve the diagnosis right now.

Available Information:
<AVAILABLE_INFO>

Respond with exactly one token: SIMULATOR, RETRIEVAL, or STRATEGY.)RAW";

const std::map<std::string, std::string>& builtin_templates() {
  static const std::map<std::string, std::string> templates = {
      {"specialist_preface", k_specialist_preface},
      {"doctor", k_doctor},
      {"patient", k_patient},
      {"keywords", k_keywords},
      {"synthesis", k_synthesis},
      {"diagnosis", k_diagnosis},
      {"driver_instruction", k_driver_instruction},
      {"driver_chooser", k_driver_chooser},
  };
  return templates;
}

std::string strip_trailing_newlines(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values) {
  std::string out = text;
  for (const auto& [key, value] : values) {
    const std::string token = "<" + key + ">";
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return out;
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.templates_ = builtin_templates();
  return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::ConfigError, "prompt directory not found: " + dir.string());
  }
  PromptLibrary lib = builtin();
  for (auto& [name, text] : lib.templates_) {
    const auto path = dir / (name + ".txt");
    std::ifstream in(path);
    if (!in) continue;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    text = strip_trailing_newlines(buffer.str());
  }
  return lib;
}

const std::string& PromptLibrary::text(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw Error(ErrorCode::ConfigError, "unknown prompt template '" + name + "'");
  }
  return it->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& values) const {
  return render_template(text(name), values);
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

}  // namespace ddx::prompts
