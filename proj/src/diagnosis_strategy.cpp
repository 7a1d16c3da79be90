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
#include "ddx/diagnosis_strategy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ddx::strategy {

std::string to_string(Shots shots) {
  switch (shots) {
    case Shots::ZeroShot: return "zero_shot";
    case Shots::FewShotStatic: return "few_shot_static";
    case Shots::FewShotDynamic: return "few_shot_dynamic";
  }
  return "unknown";
}

Shots shots_from_string(std::string_view name) {
  if (name == "zero_shot" || name == "zero-shot") return Shots::ZeroShot;
  if (name == "few_shot_static" || name == "static") return Shots::FewShotStatic;
  if (name == "few_shot_dynamic" || name == "dynamic") return Shots::FewShotDynamic;
  throw Error(ErrorCode::InvalidArgument, "unknown shots mode '" + std::string(name) + "'");
}

std::string to_string(Reasoning reasoning) {
  return reasoning == Reasoning::Standard ? "standard" : "cot";
}

Reasoning reasoning_from_string(std::string_view name) {
  if (name == "standard") return Reasoning::Standard;
  if (name == "cot" || name == "chain_of_thought") return Reasoning::CoT;
  throw Error(ErrorCode::InvalidArgument, "unknown reasoning mode '" + std::string(name) + "'");
}

void StrategyMode::validate() const {
  if (shots != Shots::ZeroShot && k_examples < 1) {
    throw Error(ErrorCode::InvalidArgument, "few-shot modes need k_examples >= 1");
  }
  if (shots == Shots::FewShotDynamic && (!embedding_model || embedding_model->empty())) {
    throw Error(ErrorCode::InvalidArgument, "dynamic few-shot needs an embedding model");
  }
}

ExampleStore ExampleStore::from_cases(std::vector<PatientCase> cases) {
  ExampleStore store;
  store.examples_.reserve(cases.size());
  for (auto& c : cases) {
    store.examples_.push_back(StoredExample{std::move(c), std::nullopt});
  }
  return store;
}

std::string ExampleStore::embedding_text(const PatientCase& patient) {
  std::string out;
  if (patient.initial_info) out = patient.initial_info->to_text();
  for (const auto& fact : patient.full_profile) {
    if (!out.empty()) out.push_back('\n');
    out += fact;
  }
  return out;
}

std::string ExampleStore::embedding_text(const std::optional<InitialInfo>& initial,
                                         const PatientProfile& profile) {
  std::string out;
  if (initial) out = initial->to_text();
  const std::string facts = profile.joined_text();
  if (!facts.empty()) {
    if (!out.empty()) out.push_back('\n');
    out += facts;
  }
  return out;
}

void ExampleStore::build_embeddings(llm::EmbeddingClient& client) {
  embeddings_.clear();
  embeddings_.reserve(examples_.size());
  for (const auto& example : examples_) {
    llm::EmbeddingVector v = client.embed(embedding_text(example.patient));
    embeddings_.push_back(llm::normalize_unit(v).values);
  }
  embedding_model_ = client.model_id();
}

void ExampleStore::build_rationales(RationaleMode mode, llm::ChatClient* chat) {
  for (auto& example : examples_) {
    if (example.rationale) continue;
    if (mode == RationaleMode::Placeholder) {
      example.rationale = "The reported findings are most consistent with " +
                          example.patient.ground_truth + ".";
      continue;
    }
    if (chat == nullptr || !chat->valid()) {
      throw Error(ErrorCode::ConfigError, "backend rationale mode needs a chat client");
    }
    llm::ChatRequest request;
    request.messages.push_back(
        {llm::Role::User,
         "Explain step by step, in at most four sentences, why the findings below point to "
         "the diagnosis '" +
             example.patient.ground_truth + "'.\n\nFindings:\n" +
             embedding_text(example.patient)});
    example.rationale = chat->complete(request);
  }
}

namespace {

nlohmann::json store_entries_json(const std::vector<StoredExample>& examples,
                                  const std::vector<std::vector<double>>& embeddings) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    nlohmann::json entry{{"case", examples[i].patient}};
    if (examples[i].rationale) entry["rationale"] = *examples[i].rationale;
    if (i < embeddings.size()) entry["embedding"] = embeddings[i];
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

std::string ExampleStore::content_hash() const {
  return llm::hex64(llm::fnv1a64(store_entries_json(examples_, embeddings_).dump()));
}

void ExampleStore::save(const std::filesystem::path& path) const {
  nlohmann::json j{{"schema", "ddxflow.example_store.v1"},
                   {"content_hash", content_hash()},
                   {"embedding_model", embedding_model_},
                   {"entries", store_entries_json(examples_, embeddings_)}};
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::ConfigError, "cannot write example store " + path.string());
  }
  out << j.dump(2) << "\n";
}

ExampleStore ExampleStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError, "cannot open example store " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "example store " + path.string() + ": " + e.what());
  }
  ExampleStore store;
  store.embedding_model_ = j.value("embedding_model", "");
  for (const auto& entry : j.at("entries")) {
    StoredExample example;
    example.patient = entry.at("case").get<PatientCase>();
    if (entry.contains("rationale")) example.rationale = entry.at("rationale").get<std::string>();
    if (entry.contains("embedding")) {
      store.embeddings_.push_back(entry.at("embedding").get<std::vector<double>>());
    }
    store.examples_.push_back(std::move(example));
  }
  if (!store.embeddings_.empty() && store.embeddings_.size() != store.examples_.size()) {
    throw Error(ErrorCode::ConfigError,
                "example store " + path.string() + ": embedding rows do not match entries");
  }
  for (const auto& row : store.embeddings_) {
    double norm_sq = 0.0;
    for (double x : row) norm_sq += x * x;
    if (std::fabs(std::sqrt(norm_sq) - 1.0) > 1e-6) {
      throw Error(ErrorCode::ConfigError,
                  "example store " + path.string() + ": embedding row is not unit-norm");
    }
  }
  const std::string expected = j.value("content_hash", "");
  if (!expected.empty() && expected != store.content_hash()) {
    throw Error(ErrorCode::ConfigError,
                "example store " + path.string() + ": content hash mismatch");
  }
  return store;
}

std::vector<const StoredExample*> select_examples_static(const ExampleStore& store, int k) {
  if (k < 1) {
    throw Error(ErrorCode::InvalidArgument, "select_examples_static: k must be >= 1");
  }
  std::vector<const StoredExample*> out;
  const std::size_t count = std::min<std::size_t>(store.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < count; ++i) out.push_back(&store.examples()[i]);
  return out;
}

std::vector<int> nearest_by_l2(const std::vector<std::vector<double>>& rows,
                               const std::vector<double>& query, int k) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != query.size()) {
      throw Error(ErrorCode::InvalidArgument, "nearest_by_l2: dimension mismatch");
    }
    double dist_sq = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) {
      const double delta = row[d] - query[d];
      dist_sq += delta * delta;
    }
    scored.emplace_back(dist_sq, static_cast<int>(i));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  const std::size_t count = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(std::max(0, k)));
  for (std::size_t i = 0; i < count; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<const StoredExample*> select_examples_dynamic(
    const ExampleStore& store, const std::optional<InitialInfo>& initial,
    const PatientProfile& profile, int k, llm::EmbeddingClient& client) {
  if (!store.has_embeddings()) {
    throw Error(ErrorCode::StrategyError, "example store has no embeddings");
  }
  if (profile.empty() && !initial) {
    throw Error(ErrorCode::InvalidArgument, "query profile is empty");
  }
  llm::EmbeddingVector query;
  try {
    query = llm::normalize_unit(client.embed(ExampleStore::embedding_text(initial, profile)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::DegenerateVector) throw;
    throw Error(ErrorCode::StrategyError, std::string("embedding provider: ") + e.what());
  }
  std::vector<const StoredExample*> out;
  for (int index : nearest_by_l2(store.embeddings(), query.values, k)) {
    out.push_back(&store.examples()[static_cast<std::size_t>(index)]);
  }
  return out;
}

StrategyAgent::StrategyAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts,
                             StrategyMode mode, std::shared_ptr<const ExampleStore> store,
                             std::shared_ptr<llm::EmbeddingClient> embeddings, int ddx_length)
    : chat_(std::move(chat)),
      template_text_(prompts.text("diagnosis")),
      preface_(prompts.text("specialist_preface")),
      mode_(mode),
      store_(std::move(store)),
      embeddings_(std::move(embeddings)),
      ddx_length_(ddx_length) {
  mode_.validate();
  if (ddx_length_ < 1) {
    throw Error(ErrorCode::InvalidArgument, "ddx_length must be >= 1");
  }
}

std::vector<const StoredExample*> StrategyAgent::pick_examples(
    const std::optional<InitialInfo>& initial, const PatientProfile& profile) {
  if (mode_.shots == Shots::ZeroShot) return {};
  if (!store_ || store_->empty()) {
    throw Error(ErrorCode::StrategyError, "few-shot mode configured without an example store");
  }
  if (mode_.shots == Shots::FewShotStatic) {
    return select_examples_static(*store_, mode_.k_examples);
  }
  if (!embeddings_ || !embeddings_->valid()) {
    throw Error(ErrorCode::StrategyError, "dynamic few-shot needs an embedding client");
  }
  return select_examples_dynamic(*store_, initial, profile, mode_.k_examples, *embeddings_);
}

RankedDifferential StrategyAgent::diagnose(const PatientProfile& profile,
                                           const std::optional<InitialInfo>& initial,
                                           const std::vector<std::string>& options,
                                           const DiagnoseContext& context,
                                           ParseWarnings* warnings) {
  if (options.empty()) {
    throw Error(ErrorCode::InvalidArgument, "diagnose: options must be non-empty");
  }
  if (context.instructions.size() > 10) {
    throw Error(ErrorCode::InvalidArgument, "diagnose: more than 10 instructions");
  }

  std::string previous_block = "None.";
  if (!context.previous.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < context.previous.size(); ++i) {
      if (i) os << "\n\n";
      os << "Iteration " << context.previous[i].produced_at_iteration << ":\n"
         << render_ranked_list(context.previous[i]);
    }
    previous_block = os.str();
  }

  std::string instructions_block = "None.";
  if (!context.instructions.empty()) {
    instructions_block.clear();
    for (const auto& item : context.instructions) {
      if (!instructions_block.empty()) instructions_block += "\n";
      instructions_block += "- " + item;
    }
  }

  std::string evidence_block = "None.";
  if (context.evidence && !context.evidence->text.empty()) {
    evidence_block = context.evidence->text;
  }

  std::string options_block;
  for (const auto& option : options) {
    if (!options_block.empty()) options_block += "\n";
    options_block += "- " + option;
  }

  std::string profile_block = profile.joined_text();
  if (initial) {
    const std::string info = initial->to_text();
    profile_block = profile_block.empty() ? info : info + "\n" + profile_block;
  }
  if (profile_block.empty()) profile_block = "None.";

  std::string examples_block = "None.";
  const auto picked = pick_examples(initial, profile);
  if (!picked.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const PatientCase& patient = picked[i]->patient;
      if (i) os << "\n\n";
      os << "Example " << (i + 1) << ":\nProfile:\n" << ExampleStore::embedding_text(patient);
      if (mode_.reasoning == Reasoning::CoT && picked[i]->rationale) {
        os << "\nReasoning: " << *picked[i]->rationale;
      }
      if (patient.ground_truth_ddx && !patient.ground_truth_ddx->empty()) {
        os << "\nRanked differential diagnosis:\n"
           << render_ranked_list(RankedDifferential{*patient.ground_truth_ddx, 1});
      } else {
        os << "\nDiagnosis: " << patient.ground_truth;
      }
    }
    examples_block = os.str();
  }

  const std::string reasoning_directive =
      mode_.reasoning == Reasoning::CoT
          ? "First reason step by step through the key findings and how they discriminate "
            "between the candidate diseases. After your reasoning, output the ranked list in "
            "the format specified."
          : "Directly provide your response in the format specified, without additional text.";

  const std::string prompt = prompts::render_template(
      template_text_, {{"PREFACE", preface_},
                       {"DDX_LENGTH", std::to_string(ddx_length_)},
                       {"REASONING_DIRECTIVE", reasoning_directive},
                       {"PREVIOUS_DDX", previous_block},
                       {"INSTRUCTIONS", instructions_block},
                       {"EVIDENCE", evidence_block},
                       {"DIAGNOSIS_OPTIONS", options_block},
                       {"PATIENT_PROFILE", profile_block},
                       {"EXAMPLES", examples_block}});

  llm::ChatRequest request;
  request.messages.push_back({llm::Role::User, prompt});

  RankedDifferential parsed;
  bool have_parsed = false;
  for (int attempt = 0; attempt < 2 && !have_parsed; ++attempt) {
    std::string reply;
    try {
      reply = chat_.complete(request);
    } catch (const Error& e) {
      throw Error(ErrorCode::StrategyError, std::string("diagnosis backend: ") + e.what());
    }
    try {
      parsed = parse_ranked_list(reply, ddx_length_, warnings);
      have_parsed = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseFailure) throw;
      request.messages.push_back({llm::Role::Assistant, reply});
      request.messages.push_back(
          {llm::Role::User,
           "Your response did not match the required format. Respond only with the ranked "
           "list, one '<rank>. <diagnosis>' per line, starting at 1."});
    }
  }
  if (!have_parsed) {
    throw Error(ErrorCode::StrategyError, "diagnosis reply unparseable after re-prompt");
  }

  std::set<std::string> allowed;
  for (const auto& option : options) allowed.insert(normalize_text(option));
  RankedDifferential filtered;
  filtered.produced_at_iteration = context.iteration;
  for (auto& entry : parsed.entries) {
    if (allowed.count(normalize_text(entry))) {
      filtered.entries.push_back(std::move(entry));
    } else if (warnings) {
      warnings->messages.push_back("dropped off-options diagnosis: '" + entry + "'");
    }
  }
  if (filtered.entries.empty()) {
    throw Error(ErrorCode::StrategyEmptyAfterFilter,
                "no diagnosis left after filtering to the options list");
  }
  return filtered;
}

}  // namespace ddx::strategy
