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
#ifndef DDXFLOW_RUN_CONFIG_HPP
#define DDXFLOW_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ddx/benchmark_ingest.hpp"
#include "ddx/diagnosis_strategy.hpp"
#include "ddx/knowledge_retrieval.hpp"
#include "ddx/orchestrator.hpp"

namespace ddx::run {

struct ChatBackendConfig {
  std::string type = "scripted";  // scripted | http
  std::string model_id = "scripted";
  std::string base_url;
  std::string api_key_env;
  std::string script_path;  // scripted rules file
  int max_attempts = 3;
  int initial_delay_ms = 200;
};

struct EmbeddingBackendConfig {
  std::string type = "hashed";  // hashed | http
  std::string model_id;
  int dimension = 16;
  std::string base_url;
  std::string api_key_env;
  std::string cache_dir;  // persistent embedding cache (optional)
};

struct RetrievalSettings {
  std::string source = "wikipedia";
  int top_k = 3;
  std::string transport = "http";  // http | none (offline: zero results)
  std::string wikipedia_endpoint = "https://en.wikipedia.org/w/api.php";
  std::string pubmed_endpoint = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
  std::string pubmed_api_key_env;
  bool pubmed_full_text_only = true;
  double requests_per_second = 2.0;
  std::string cache_dir;  // day-scoped search cache (optional)
};

/// Everything a run needs; round-trips losslessly through JSON.
struct RunConfig {
  // dataset + sampling
  std::string dataset = "ddxplus";
  std::string dataset_path;
  std::string dataset_subset;  // RareBench only
  std::size_t sample_n = 0;    // 0 = all cases
  std::uint64_t seed = 0;

  // iteration policy
  std::string policy = "fixed";  // fixed | dynamic
  int max_iterations = 3;
  int questions_per_iteration = 5;
  bool stop_on_stabilize = false;
  std::string instruction_mode = "llm";  // llm | default
  std::string patient_mode = "llm";      // llm | oracle (rule-based, deterministic)

  // diagnosis strategy
  std::string strategy_shots = "zero_shot";  // zero_shot | static | dynamic
  std::string strategy_reasoning = "standard";  // standard | cot
  int k_examples = 5;
  std::string example_store_path;  // prebuilt store file (optional)
  std::string rationale_mode = "placeholder";  // placeholder | backend
  int ddx_length = kDefaultDdxLength;

  RetrievalSettings retrieval;
  ChatBackendConfig chat;
  EmbeddingBackendConfig embedding;

  std::string output_dir;
  int parallelism = 1;
  std::string clock = "auto";  // auto | logical | system
  std::string prompt_dir;      // template overrides (optional)

  ingest::DatasetDescriptor descriptor() const;
  driver::IterationPolicy iteration_policy() const;
  strategy::StrategyMode strategy_mode() const;

  /// Throws Error(ConfigError) on inconsistent settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const RetrievalSettings& s);
void from_json(const nlohmann::json& j, RetrievalSettings& s);
void to_json(nlohmann::json& j, const ChatBackendConfig& c);
void from_json(const nlohmann::json& j, ChatBackendConfig& c);
void to_json(nlohmann::json& j, const EmbeddingBackendConfig& c);
void from_json(const nlohmann::json& j, EmbeddingBackendConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Replaces ${NAME} with the environment value; throws Error(ConfigError)
/// naming the variable when it is unset.
std::string expand_env(const std::string& text);

/// Reads a JSON config file, expanding ${ENV_VAR} references first.
RunConfig load_config(const std::filesystem::path& path);

/// Hash of the canonical config JSON with output_dir cleared, so runs into
/// different directories hash identically.
std::string config_hash(const RunConfig& config);

}  // namespace ddx::run

#endif  // DDXFLOW_RUN_CONFIG_HPP
