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
#include "ddx/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "ddx/history_taking.hpp"
#include "ddx/trace.hpp"

namespace ddx::run {

namespace {

/// Offline transport: well-formed empty results, so retrieval degrades to
/// the no-evidence summary without touching the network.
class OfflineTransport : public http::Transport {
 public:
  http::Response get(const std::string& url, const http::Headers&) override {
    if (url.find("esearch") != std::string::npos) {
      return {200, R"({"esearchresult":{"idlist":[]}})"};
    }
    if (url.find("list=search") != std::string::npos) {
      return {200, R"({"query":{"search":[]}})"};
    }
    return {200, R"({"query":{"pages":{}}})"};
  }

  http::Response post(const std::string&, const http::Headers&, const std::string&,
                      const std::string&) override {
    return {404, "offline"};
  }
};

std::shared_ptr<trace::Clock> make_clock(const RunConfig& config) {
  const bool logical = config.clock == "logical" ||
                       (config.clock == "auto" && config.chat.type == "scripted");
  if (logical) return std::make_shared<trace::LogicalClock>();
  return std::make_shared<trace::SystemClock>();
}

std::shared_ptr<llm::ChatBackend> make_chat_backend(const RunConfig& config) {
  if (config.chat.type == "scripted") {
    return llm::ScriptedChatBackend::from_file(config.chat.script_path);
  }
  llm::HttpChatBackend::Options options;
  options.base_url = config.chat.base_url;
  options.api_key_env = config.chat.api_key_env;
  options.default_model = config.chat.model_id;
  return std::make_shared<llm::HttpChatBackend>(options, http::make_httplib_transport());
}

std::shared_ptr<llm::EmbeddingBackend> make_embedding_backend(const RunConfig& config) {
  if (config.embedding.type == "hashed") {
    return std::make_shared<llm::HashedEmbeddingBackend>(config.embedding.dimension);
  }
  llm::HttpEmbeddingBackend::Options options;
  options.base_url = config.embedding.base_url;
  options.api_key_env = config.embedding.api_key_env;
  options.model = config.embedding.model_id;
  return std::make_shared<llm::HttpEmbeddingBackend>(options, http::make_httplib_transport());
}

retrieval::RetrievalConfig make_retrieval_config(const RunConfig& config) {
  retrieval::RetrievalConfig rc;
  rc.source = retrieval::source_from_string(config.retrieval.source);
  rc.top_k = config.retrieval.top_k;
  rc.wikipedia_endpoint = config.retrieval.wikipedia_endpoint;
  rc.pubmed_endpoint = config.retrieval.pubmed_endpoint;
  rc.pubmed_api_key_env = config.retrieval.pubmed_api_key_env;
  rc.pubmed_full_text_only = config.retrieval.pubmed_full_text_only;
  return rc;
}

}  // namespace

int RunSummary::completed_count() const {
  return static_cast<int>(
      std::count_if(outcomes.begin(), outcomes.end(),
                    [](const CaseOutcome& outcome) { return outcome.completed; }));
}

RunSummary run_experiment(const RunConfig& config) {
  config.validate();

  const prompts::PromptLibrary prompt_library =
      config.prompt_dir.empty() ? prompts::PromptLibrary::builtin()
                                : prompts::PromptLibrary::from_dir(config.prompt_dir);

  ingest::LoadResult loaded = ingest::load_dataset(config.descriptor());
  std::vector<PatientCase> eval_cases =
      config.sample_n > 0 ? ingest::sample_cases(loaded.cases, config.sample_n, config.seed)
                          : loaded.cases;

  const strategy::StrategyMode mode = config.strategy_mode();
  const llm::RetryPolicy retry{config.chat.max_attempts,
                               std::chrono::milliseconds(config.chat.initial_delay_ms), 2.0};
  std::shared_ptr<llm::ChatBackend> chat_backend = make_chat_backend(config);

  auto embedding_client = std::make_shared<llm::EmbeddingClient>(
      make_embedding_backend(config),
      config.embedding.cache_dir.empty()
          ? std::nullopt
          : std::optional<std::filesystem::path>(config.embedding.cache_dir));

  // Few-shot reference pool: prebuilt store file, or the non-sampled cases.
  std::shared_ptr<const strategy::ExampleStore> store;
  if (mode.shots != strategy::Shots::ZeroShot) {
    strategy::ExampleStore built;
    if (!config.example_store_path.empty()) {
      built = strategy::ExampleStore::load(config.example_store_path);
    } else {
      std::set<std::string> eval_ids;
      for (const auto& c : eval_cases) eval_ids.insert(c.case_id);
      built = strategy::ExampleStore::from_cases(
          ingest::split_example_store(loaded.cases, eval_ids));
    }
    if (built.empty()) {
      throw Error(ErrorCode::ConfigError, "few-shot mode with an empty example store");
    }
    if (mode.reasoning == strategy::Reasoning::CoT) {
      if (config.rationale_mode == "backend") {
        llm::ChatClient rationale_chat(chat_backend, retry, config.chat.model_id);
        built.build_rationales(strategy::RationaleMode::Backend, &rationale_chat);
      } else {
        built.build_rationales(strategy::RationaleMode::Placeholder);
      }
    }
    if (mode.shots == strategy::Shots::FewShotDynamic && !built.has_embeddings()) {
      built.build_embeddings(*embedding_client);
    }
    store = std::make_shared<const strategy::ExampleStore>(std::move(built));
  }

  const bool offline = config.retrieval.transport == "none";
  std::shared_ptr<http::Transport> transport =
      offline ? std::static_pointer_cast<http::Transport>(std::make_shared<OfflineTransport>())
              : http::make_httplib_transport();
  // rate limiting only matters against the real public endpoints
  std::shared_ptr<retrieval::Throttle> throttle;
  if (!offline) {
    throttle = std::make_shared<retrieval::Throttle>(config.retrieval.requests_per_second);
  }
  std::shared_ptr<retrieval::SearchCache> search_cache;
  if (!config.retrieval.cache_dir.empty()) {
    search_cache = std::make_shared<retrieval::SearchCache>(config.retrieval.cache_dir);
  }
  const retrieval::RetrievalConfig retrieval_config = make_retrieval_config(config);

  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  RunSummary summary;
  summary.output_dir = out_dir;
  summary.outcomes.resize(eval_cases.size());

  auto run_case = [&](std::size_t index) {
    const PatientCase& patient_case = eval_cases[index];
    CaseOutcome& outcome = summary.outcomes[index];
    outcome.case_id = patient_case.case_id;
    try {
      auto clock = make_clock(config);
      nlohmann::json header{{"dataset", to_string(patient_case.dataset)},
                            {"ground_truth", patient_case.ground_truth},
                            {"policy", config.policy},
                            {"max_iterations", config.max_iterations},
                            {"questions_per_iteration", config.questions_per_iteration},
                            {"chat_model", config.chat.model_id},
                            {"config_hash", config_hash(config)},
                            {"seed", config.seed}};
      trace::TraceWriter writer(out_dir, patient_case.case_id, std::move(header), clock);
      outcome.trace_file = writer.path().filename().string();
      auto iteration_cell = std::make_shared<int>(0);

      auto client_for = [&](trace::Component component) {
        llm::ChatClient client(chat_backend, retry, config.chat.model_id);
        client.set_observer(writer.chat_observer(component, iteration_cell.get()));
        return client;
      };

      history::DoctorAgent doctor(client_for(trace::Component::Simulator), prompt_library);
      history::PatientSimState sim_state{patient_case.full_profile, patient_case.initial_info};
      std::unique_ptr<history::PatientSim> patient;
      if (config.patient_mode == "oracle") {
        patient = std::make_unique<history::OraclePatient>(std::move(sim_state));
      } else {
        patient = std::make_unique<history::LlmPatient>(
            client_for(trace::Component::Simulator), prompt_library, std::move(sim_state));
      }
      auto retrieval_agent = std::make_shared<retrieval::RetrievalAgent>(
          client_for(trace::Component::Retrieval), prompt_library, retrieval_config, transport,
          throttle, search_cache);
      auto strategy_agent = std::make_shared<strategy::StrategyAgent>(
          client_for(trace::Component::Strategy), prompt_library, mode, store, embedding_client,
          config.ddx_length);

      driver::Components components;
      components.simulator = [&doctor, &patient](const PatientProfile&,
                                                 const std::optional<InitialInfo>& initial,
                                                 const std::vector<std::string>& goals,
                                                 int max_questions) {
        return history::run_dialogue(doctor, *patient, initial, goals, max_questions);
      };
      components.retrieval = [retrieval_agent](const retrieval::SearchQuery& query) {
        return retrieval_agent->run(query);
      };
      components.strategy = [strategy_agent](const driver::StrategyRequest& request) {
        return strategy_agent->diagnose(request.profile, request.initial, request.options,
                                        request.context);
      };

      driver::DriverConfig driver_config;
      driver_config.policy = config.iteration_policy();
      driver_config.stop_on_stabilize = config.stop_on_stabilize;
      driver_config.instruction_mode = config.instruction_mode == "default"
                                           ? driver::InstructionMode::Defaults
                                           : driver::InstructionMode::Llm;
      driver_config.retrieval_source = retrieval_config.source;

      driver::Driver driver(patient_case, driver_config, std::move(components), &writer,
                            iteration_cell, client_for(trace::Component::Driver),
                            prompt_library);
      driver.run();
      outcome.completed = true;
    } catch (const std::exception& e) {
      outcome.completed = false;
      outcome.error = e.what();
    }
  };

  const int workers = std::max(1, std::min<int>(config.parallelism,
                                                static_cast<int>(eval_cases.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < eval_cases.size(); ++i) run_case(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= eval_cases.size()) return;
          run_case(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Manifest: everything needed to re-execute the run bit-identically.
  RunConfig manifest_config = config;
  manifest_config.output_dir.clear();
  nlohmann::json case_entries = nlohmann::json::array();
  std::vector<const CaseOutcome*> ordered;
  for (const auto& outcome : summary.outcomes) ordered.push_back(&outcome);
  std::sort(ordered.begin(), ordered.end(), [](const CaseOutcome* a, const CaseOutcome* b) {
    return a->case_id < b->case_id;
  });
  for (const CaseOutcome* outcome : ordered) {
    case_entries.push_back({{"case_id", outcome->case_id},
                            {"completed", outcome->completed},
                            {"error", outcome->error},
                            {"trace_file", outcome->trace_file}});
  }
  nlohmann::json manifest{{"schema", "ddxflow.run_manifest.v1"},
                          {"config", manifest_config},
                          {"config_hash", config_hash(config)},
                          {"seed", config.seed},
                          {"dataset", config.dataset},
                          {"chat_model", config.chat.model_id},
                          {"embedding_model", embedding_client->model_id()},
                          {"completed", summary.completed_count()},
                          {"cases", case_entries}};
  summary.manifest_path = out_dir / "run_manifest.json";
  std::ofstream manifest_out(summary.manifest_path);
  manifest_out << manifest.dump(2) << "\n";
  return summary;
}

}  // namespace ddx::run
