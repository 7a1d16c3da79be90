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
#ifndef DDXFLOW_DIAGNOSIS_STRATEGY_HPP
#define DDXFLOW_DIAGNOSIS_STRATEGY_HPP

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddx/core_model.hpp"
#include "ddx/knowledge_retrieval.hpp"
#include "ddx/llm_provider.hpp"
#include "ddx/prompts.hpp"

namespace ddx::strategy {

enum class Shots { ZeroShot, FewShotStatic, FewShotDynamic };
enum class Reasoning { Standard, CoT };

std::string to_string(Shots shots);
Shots shots_from_string(std::string_view name);
std::string to_string(Reasoning reasoning);
Reasoning reasoning_from_string(std::string_view name);

struct StrategyMode {
  Shots shots = Shots::ZeroShot;
  Reasoning reasoning = Reasoning::Standard;
  int k_examples = 5;
  std::optional<std::string> embedding_model;  // required iff FewShotDynamic

  /// Throws Error(InvalidArgument) on k_examples < 1 for few-shot modes or
  /// a dynamic mode without an embedding model.
  void validate() const;
};

struct StoredExample {
  PatientCase patient;
  std::optional<std::string> rationale;
};

enum class RationaleMode { Placeholder, Backend };

/// Reference pool for few-shot diagnosis. Immutable once built; embeddings
/// (when present) are unit rows aligned with the examples.
class ExampleStore {
 public:
  ExampleStore() = default;
  static ExampleStore from_cases(std::vector<PatientCase> cases);

  const std::vector<StoredExample>& examples() const { return examples_; }
  bool has_embeddings() const { return !embeddings_.empty(); }
  const std::vector<std::vector<double>>& embeddings() const { return embeddings_; }
  const std::string& embedding_model() const { return embedding_model_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }

  /// The documented text representation embedded for similarity search:
  /// initial-info lines followed by newline-joined profile facts.
  static std::string embedding_text(const PatientCase& patient);
  static std::string embedding_text(const std::optional<InitialInfo>& initial,
                                    const PatientProfile& profile);

  /// Embeds every example (unit-normalized) through the given client.
  void build_embeddings(llm::EmbeddingClient& client);

  /// Pre-generates one reasoning rationale per example. Placeholder mode is
  /// deterministic and offline; Backend mode asks the chat model once per
  /// example (cache the store afterwards).
  void build_rationales(RationaleMode mode, llm::ChatClient* chat = nullptr);

  /// Content-hash-versioned JSON persistence.
  void save(const std::filesystem::path& path) const;
  static ExampleStore load(const std::filesystem::path& path);

  std::string content_hash() const;

 private:
  std::vector<StoredExample> examples_;
  std::vector<std::vector<double>> embeddings_;
  std::string embedding_model_;
};

/// First k examples in store order.
std::vector<const StoredExample*> select_examples_static(const ExampleStore& store, int k);

/// Indices of the k rows nearest to query by Euclidean distance, ties broken
/// by ascending index. Exposed separately so the selection rule can be
/// checked against plain vectors.
std::vector<int> nearest_by_l2(const std::vector<std::vector<double>>& rows,
                               const std::vector<double>& query, int k);

/// Embeds the query profile, unit-normalizes, and returns the k nearest
/// examples. Throws Error(StrategyError) when the store has no embeddings or
/// the provider fails.
std::vector<const StoredExample*> select_examples_dynamic(
    const ExampleStore& store, const std::optional<InitialInfo>& initial,
    const PatientProfile& profile, int k, llm::EmbeddingClient& client);

struct DiagnoseContext {
  std::vector<RankedDifferential> previous;
  std::vector<std::string> instructions;  // <= 10 items
  std::optional<retrieval::EvidenceSummary> evidence;
  int iteration = 1;
};

/// Produces a ranked differential via the configured strategy mode.
class StrategyAgent {
 public:
  StrategyAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts, StrategyMode mode,
                std::shared_ptr<const ExampleStore> store = nullptr,
                std::shared_ptr<llm::EmbeddingClient> embeddings = nullptr,
                int ddx_length = kDefaultDdxLength);

  /// Assembles the diagnosis prompt, parses the reply (one re-prompt on
  /// parse failure), and drops entries not present in options. Dropped names
  /// are reported through warnings. Throws Error(StrategyError) on a second
  /// parse failure and Error(StrategyEmptyAfterFilter) when nothing is left.
  RankedDifferential diagnose(const PatientProfile& profile,
                              const std::optional<InitialInfo>& initial,
                              const std::vector<std::string>& options,
                              const DiagnoseContext& context,
                              ParseWarnings* warnings = nullptr);

  const StrategyMode& mode() const { return mode_; }
  int ddx_length() const { return ddx_length_; }

 private:
  std::vector<const StoredExample*> pick_examples(const std::optional<InitialInfo>& initial,
                                                  const PatientProfile& profile);

  llm::ChatClient chat_;
  std::string template_text_;
  std::string preface_;
  StrategyMode mode_;
  std::shared_ptr<const ExampleStore> store_;
  std::shared_ptr<llm::EmbeddingClient> embeddings_;
  int ddx_length_;
};

}  // namespace ddx::strategy

#endif  // DDXFLOW_DIAGNOSIS_STRATEGY_HPP
