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
#include "ddx/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ddx::run {

ingest::DatasetDescriptor RunConfig::descriptor() const {
  ingest::DatasetDescriptor d;
  d.kind = dataset_from_string(dataset);
  d.path = dataset_path;
  if (!dataset_subset.empty()) d.subset = dataset_subset;
  return d;
}

driver::IterationPolicy RunConfig::iteration_policy() const {
  driver::IterationPolicy p;
  p.kind = driver::policy_kind_from_string(policy);
  p.max_iterations = max_iterations;
  p.questions_per_iteration = questions_per_iteration;
  return p;
}

strategy::StrategyMode RunConfig::strategy_mode() const {
  strategy::StrategyMode mode;
  mode.shots = strategy::shots_from_string(strategy_shots);
  mode.reasoning = strategy::reasoning_from_string(strategy_reasoning);
  mode.k_examples = k_examples;
  if (mode.shots == strategy::Shots::FewShotDynamic) {
    mode.embedding_model = embedding.model_id.empty()
                               ? embedding.type + "-" + std::to_string(embedding.dimension)
                               : embedding.model_id;
  }
  return mode;
}

void RunConfig::validate() const {
  if (dataset_path.empty()) {
    throw Error(ErrorCode::ConfigError, "dataset_path is required");
  }
  if (output_dir.empty()) {
    throw Error(ErrorCode::ConfigError, "output_dir is required");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::ConfigError, "max_iterations must be >= 1");
  }
  if (questions_per_iteration < 1) {
    throw Error(ErrorCode::ConfigError, "questions_per_iteration must be >= 1");
  }
  if (parallelism < 1) {
    throw Error(ErrorCode::ConfigError, "parallelism must be >= 1");
  }
  if (patient_mode != "llm" && patient_mode != "oracle") {
    throw Error(ErrorCode::ConfigError, "patient_mode must be 'llm' or 'oracle'");
  }
  if (!std::filesystem::exists(dataset_path)) {
    throw Error(ErrorCode::ConfigError, "dataset_path does not exist: " + dataset_path);
  }
  if (!example_store_path.empty() && !std::filesystem::exists(example_store_path)) {
    throw Error(ErrorCode::ConfigError,
                "example_store_path does not exist: " + example_store_path);
  }
  if (!prompt_dir.empty() && !std::filesystem::is_directory(prompt_dir)) {
    throw Error(ErrorCode::ConfigError, "prompt_dir does not exist: " + prompt_dir);
  }
  if (chat.type != "scripted" && chat.type != "http") {
    throw Error(ErrorCode::ConfigError, "chat.type must be 'scripted' or 'http'");
  }
  if (chat.type == "scripted" &&
      (chat.script_path.empty() || !std::filesystem::exists(chat.script_path))) {
    throw Error(ErrorCode::ConfigError, "scripted chat backend needs an existing script_path");
  }
  if (chat.type == "http" && chat.base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "http chat backend needs chat.base_url");
  }
  if (embedding.type != "hashed" && embedding.type != "http") {
    throw Error(ErrorCode::ConfigError, "embedding.type must be 'hashed' or 'http'");
  }
  if (clock != "auto" && clock != "logical" && clock != "system") {
    throw Error(ErrorCode::ConfigError, "clock must be auto, logical, or system");
  }
  if (retrieval.transport != "http" && retrieval.transport != "none") {
    throw Error(ErrorCode::ConfigError, "retrieval.transport must be 'http' or 'none'");
  }
  descriptor().validate();
  iteration_policy();
  strategy_mode().validate();
  retrieval::source_from_string(retrieval.source);
}

void to_json(nlohmann::json& j, const RetrievalSettings& s) {
  j = nlohmann::json{{"source", s.source},
                     {"top_k", s.top_k},
                     {"transport", s.transport},
                     {"wikipedia_endpoint", s.wikipedia_endpoint},
                     {"pubmed_endpoint", s.pubmed_endpoint},
                     {"pubmed_api_key_env", s.pubmed_api_key_env},
                     {"pubmed_full_text_only", s.pubmed_full_text_only},
                     {"requests_per_second", s.requests_per_second},
                     {"cache_dir", s.cache_dir}};
}

void from_json(const nlohmann::json& j, RetrievalSettings& s) {
  s = RetrievalSettings{};
  s.source = j.value("source", s.source);
  s.top_k = j.value("top_k", s.top_k);
  s.transport = j.value("transport", s.transport);
  s.wikipedia_endpoint = j.value("wikipedia_endpoint", s.wikipedia_endpoint);
  s.pubmed_endpoint = j.value("pubmed_endpoint", s.pubmed_endpoint);
  s.pubmed_api_key_env = j.value("pubmed_api_key_env", s.pubmed_api_key_env);
  s.pubmed_full_text_only = j.value("pubmed_full_text_only", s.pubmed_full_text_only);
  s.requests_per_second = j.value("requests_per_second", s.requests_per_second);
  s.cache_dir = j.value("cache_dir", s.cache_dir);
}

void to_json(nlohmann::json& j, const ChatBackendConfig& c) {
  j = nlohmann::json{{"type", c.type},
                     {"model_id", c.model_id},
                     {"base_url", c.base_url},
                     {"api_key_env", c.api_key_env},
                     {"script_path", c.script_path},
                     {"max_attempts", c.max_attempts},
                     {"initial_delay_ms", c.initial_delay_ms}};
}

void from_json(const nlohmann::json& j, ChatBackendConfig& c) {
  c = ChatBackendConfig{};
  c.type = j.value("type", c.type);
  c.model_id = j.value("model_id", c.model_id);
  c.base_url = j.value("base_url", c.base_url);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.script_path = j.value("script_path", c.script_path);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.initial_delay_ms = j.value("initial_delay_ms", c.initial_delay_ms);
}

void to_json(nlohmann::json& j, const EmbeddingBackendConfig& c) {
  j = nlohmann::json{{"type", c.type},
                     {"model_id", c.model_id},
                     {"dimension", c.dimension},
                     {"base_url", c.base_url},
                     {"api_key_env", c.api_key_env},
                     {"cache_dir", c.cache_dir}};
}

void from_json(const nlohmann::json& j, EmbeddingBackendConfig& c) {
  c = EmbeddingBackendConfig{};
  c.type = j.value("type", c.type);
  c.model_id = j.value("model_id", c.model_id);
  c.dimension = j.value("dimension", c.dimension);
  c.base_url = j.value("base_url", c.base_url);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"dataset", c.dataset},
                     {"dataset_path", c.dataset_path},
                     {"dataset_subset", c.dataset_subset},
                     {"sample_n", c.sample_n},
                     {"seed", c.seed},
                     {"policy", c.policy},
                     {"max_iterations", c.max_iterations},
                     {"questions_per_iteration", c.questions_per_iteration},
                     {"stop_on_stabilize", c.stop_on_stabilize},
                     {"instruction_mode", c.instruction_mode},
                     {"patient_mode", c.patient_mode},
                     {"strategy_shots", c.strategy_shots},
                     {"strategy_reasoning", c.strategy_reasoning},
                     {"k_examples", c.k_examples},
                     {"example_store_path", c.example_store_path},
                     {"rationale_mode", c.rationale_mode},
                     {"ddx_length", c.ddx_length},
                     {"retrieval", c.retrieval},
                     {"chat", c.chat},
                     {"embedding", c.embedding},
                     {"output_dir", c.output_dir},
                     {"parallelism", c.parallelism},
                     {"clock", c.clock},
                     {"prompt_dir", c.prompt_dir}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  c.dataset = j.value("dataset", c.dataset);
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.dataset_subset = j.value("dataset_subset", c.dataset_subset);
  c.sample_n = j.value("sample_n", c.sample_n);
  c.seed = j.value("seed", c.seed);
  c.policy = j.value("policy", c.policy);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.questions_per_iteration = j.value("questions_per_iteration", c.questions_per_iteration);
  c.stop_on_stabilize = j.value("stop_on_stabilize", c.stop_on_stabilize);
  c.instruction_mode = j.value("instruction_mode", c.instruction_mode);
  c.patient_mode = j.value("patient_mode", c.patient_mode);
  c.strategy_shots = j.value("strategy_shots", c.strategy_shots);
  c.strategy_reasoning = j.value("strategy_reasoning", c.strategy_reasoning);
  c.k_examples = j.value("k_examples", c.k_examples);
  c.example_store_path = j.value("example_store_path", c.example_store_path);
  c.rationale_mode = j.value("rationale_mode", c.rationale_mode);
  c.ddx_length = j.value("ddx_length", c.ddx_length);
  if (j.contains("retrieval")) c.retrieval = j.at("retrieval").get<RetrievalSettings>();
  if (j.contains("chat")) c.chat = j.at("chat").get<ChatBackendConfig>();
  if (j.contains("embedding")) c.embedding = j.at("embedding").get<EmbeddingBackendConfig>();
  c.output_dir = j.value("output_dir", c.output_dir);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.clock = j.value("clock", c.clock);
  c.prompt_dir = j.value("prompt_dir", c.prompt_dir);
}

std::string expand_env(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("${", pos);
    if (open == std::string::npos) {
      out.append(text, pos, std::string::npos);
      break;
    }
    out.append(text, pos, open - pos);
    const std::size_t close = text.find('}', open + 2);
    if (close == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "unterminated ${...} reference");
    }
    const std::string name = text.substr(open + 2, close - open - 2);
    const char* value = std::getenv(name.c_str());
    if (value == nullptr) {
      throw Error(ErrorCode::ConfigError, "environment variable " + name + " is not set");
    }
    out += value;
    pos = close + 1;
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string expanded = expand_env(buffer.str());
  try {
    return nlohmann::json::parse(expanded).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::string config_hash(const RunConfig& config) {
  RunConfig canonical = config;
  canonical.output_dir.clear();
  nlohmann::json j = canonical;
  return llm::hex64(llm::fnv1a64(j.dump()));
}

}  // namespace ddx::run
