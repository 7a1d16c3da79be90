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

#include <cmath>
#include <fstream>
#include <random>

#include "ddx/benchmark_ingest.hpp"
#include "ddx/diagnosis_strategy.hpp"

using namespace ddx;
using namespace ddx::strategy;

namespace {

const prompts::PromptLibrary& lib() {
  static const prompts::PromptLibrary library = prompts::PromptLibrary::builtin();
  return library;
}

llm::ChatClient scripted_client(std::shared_ptr<llm::ScriptedChatBackend> backend) {
  return llm::ChatClient(std::move(backend), llm::RetryPolicy{1, std::chrono::milliseconds(1)},
                         "scripted", [](std::chrono::milliseconds) {});
}

PatientCase toy_case(const std::string& id, const std::string& truth,
                     std::vector<std::string> profile) {
  PatientCase c;
  c.case_id = id;
  c.dataset = Dataset::DDxPlus;
  c.full_profile = std::move(profile);
  c.diagnosis_options = {truth, "Other disease"};
  c.ground_truth = truth;
  return c;
}

ExampleStore store_of(int n) {
  std::vector<PatientCase> cases;
  for (int i = 0; i < n; ++i) {
    cases.push_back(
        toy_case("ex-" + std::to_string(i), "Other disease", {"fact " + std::to_string(i)}));
  }
  return ExampleStore::from_cases(std::move(cases));
}

const std::vector<std::string>& ddxplus_options() {
  static const std::vector<std::string> options = [] {
    const auto cases = ingest::read_case_file(
        std::filesystem::path(DDXFLOW_SOURCE_DIR) / "fixtures" / "ddxplus_cases.json");
    return cases.front().diagnosis_options;
  }();
  return options;
}

}  // namespace

TEST_CASE("static selection takes the first k in store order") {
  const ExampleStore ten = store_of(10);
  const auto five = select_examples_static(ten, 5);
  REQUIRE(five.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(five[static_cast<std::size_t>(i)]->patient.case_id == "ex-" + std::to_string(i));
  }

  const ExampleStore three = store_of(3);
  CHECK(select_examples_static(three, 5).size() == 3);
  CHECK_THROWS_AS(select_examples_static(three, 0), Error);
}

TEST_CASE("StrategyMode invariants") {
  StrategyMode ok{Shots::FewShotStatic, Reasoning::Standard, 5, std::nullopt};
  CHECK_NOTHROW(ok.validate());
  StrategyMode zero_k{Shots::FewShotStatic, Reasoning::Standard, 0, std::nullopt};
  CHECK_THROWS_AS(zero_k.validate(), Error);
  StrategyMode dynamic_no_model{Shots::FewShotDynamic, Reasoning::Standard, 5, std::nullopt};
  CHECK_THROWS_AS(dynamic_no_model.validate(), Error);
}

TEST_CASE("nearest_by_l2 matches the worked example and tie rule") {
  const double n = std::sqrt(0.99 * 0.99 + 0.14 * 0.14);
  const std::vector<std::vector<double>> rows = {
      {1.0, 0.0}, {0.0, 1.0}, {0.99 / n, 0.14 / n}};
  CHECK(nearest_by_l2(rows, {1.0, 0.0}, 2) == std::vector<int>{0, 2});
  CHECK(nearest_by_l2(rows, {1.0, 0.0}, 3) == std::vector<int>{0, 2, 1});

  const std::vector<std::vector<double>> tied = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
  CHECK(nearest_by_l2(tied, {1.0, 0.0}, 2) == std::vector<int>{0, 2});
}

TEST_CASE("L2-ascending order equals cosine-descending order on unit vectors") {
  std::mt19937 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 20; ++i) {
      llm::EmbeddingVector v{{}, "m"};
      for (int d = 0; d < 8; ++d) v.values.push_back(gauss(rng));
      rows.push_back(llm::normalize_unit(v).values);
    }
    llm::EmbeddingVector q{{}, "m"};
    for (int d = 0; d < 8; ++d) q.values.push_back(gauss(rng));
    const std::vector<double> query = llm::normalize_unit(q).values;

    const auto by_l2 = nearest_by_l2(rows, query, 5);

    std::vector<std::pair<double, int>> by_cosine;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double cos = 0;
      for (std::size_t d = 0; d < query.size(); ++d) cos += rows[i][d] * query[d];
      by_cosine.emplace_back(-cos, static_cast<int>(i));
    }
    std::sort(by_cosine.begin(), by_cosine.end());
    for (int k = 0; k < 5; ++k) {
      CHECK(by_l2[static_cast<std::size_t>(k)] == by_cosine[static_cast<std::size_t>(k)].second);
    }
  }
}

TEST_CASE("dynamic selection embeds the query profile and returns nearest examples") {
  std::vector<PatientCase> cases = {toy_case("a", "Other disease", {"alpha"}),
                                    toy_case("b", "Other disease", {"beta"}),
                                    toy_case("c", "Other disease", {"gamma"})};
  ExampleStore store = ExampleStore::from_cases(cases);

  auto backend = std::make_shared<llm::ScriptedEmbeddingBackend>("scripted-embed");
  backend->add(ExampleStore::embedding_text(cases[0]), {1.0, 0.0});
  backend->add(ExampleStore::embedding_text(cases[1]), {0.0, 1.0});
  backend->add(ExampleStore::embedding_text(cases[2]), {0.9, 0.4359});
  llm::EmbeddingClient client(backend);
  store.build_embeddings(client);
  for (const auto& row : store.embeddings()) {
    double norm = 0;
    for (double x : row) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
  }

  PatientProfile profile;
  profile.add("query facts", FactSource::Dialogue);
  backend->add(ExampleStore::embedding_text(std::nullopt, profile), {1.0, 0.0});

  const auto picked = select_examples_dynamic(store, std::nullopt, profile, 2, client);
  REQUIRE(picked.size() == 2);
  CHECK(picked[0]->patient.case_id == "a");
  CHECK(picked[1]->patient.case_id == "c");
}

TEST_CASE("diagnose parses the scripted ranked list against the 49-disease options") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>(
      "1. Acute otitis media\n2. URTI\n3. Chagas");
  StrategyAgent agent(scripted_client(backend), lib(),
                      StrategyMode{Shots::ZeroShot, Reasoning::Standard, 5, std::nullopt});
  PatientProfile profile;
  profile.add("I have ear pain", FactSource::Dialogue);

  CHECK(ddxplus_options().size() == 49);
  const auto ddx = agent.diagnose(profile, std::nullopt, ddxplus_options(), {});
  CHECK(ddx.entries ==
        std::vector<std::string>{"Acute otitis media", "URTI", "Chagas"});
}

TEST_CASE("diagnose drops off-options entries and logs them") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>(
      "1. URTI\n2. Made-up disease\n3. Bronchitis");
  StrategyAgent agent(scripted_client(backend), lib(),
                      StrategyMode{Shots::ZeroShot, Reasoning::Standard, 5, std::nullopt});
  PatientProfile profile;
  profile.add("cough", FactSource::Dialogue);

  ParseWarnings warnings;
  const auto ddx =
      agent.diagnose(profile, std::nullopt, {"URTI", "Bronchitis"}, {}, &warnings);
  CHECK(ddx.entries == std::vector<std::string>{"URTI", "Bronchitis"});
  REQUIRE(warnings.messages.size() == 1);
  CHECK(warnings.messages[0].find("Made-up disease") != std::string::npos);
}

TEST_CASE("diagnose error paths: unparseable twice, empty after filter") {
  PatientProfile profile;
  profile.add("cough", FactSource::Dialogue);
  {
    auto backend = std::make_shared<llm::ScriptedChatBackend>("no list at all");
    StrategyAgent agent(scripted_client(backend), lib(),
                        StrategyMode{Shots::ZeroShot, Reasoning::Standard, 5, std::nullopt});
    try {
      agent.diagnose(profile, std::nullopt, {"URTI"}, {});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StrategyError);
    }
    CHECK(backend->call_count() == 2);  // one re-prompt
  }
  {
    auto backend = std::make_shared<llm::ScriptedChatBackend>("1. Unlisted disease");
    StrategyAgent agent(scripted_client(backend), lib(),
                        StrategyMode{Shots::ZeroShot, Reasoning::Standard, 5, std::nullopt});
    try {
      agent.diagnose(profile, std::nullopt, {"URTI"}, {});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StrategyEmptyAfterFilter);
    }
  }
  CHECK_THROWS_AS(
      StrategyAgent(scripted_client(std::make_shared<llm::ScriptedChatBackend>("x")), lib(),
                    StrategyMode{})
          .diagnose(profile, std::nullopt, {}, {}),
      Error);
}

TEST_CASE("chain-of-thought replies parse past the reasoning preamble") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>(
      "The ear findings with fever fit a middle-ear infection.\n"
      "1. Acute otitis media\n2. URTI");
  StrategyAgent agent(scripted_client(backend), lib(),
                      StrategyMode{Shots::ZeroShot, Reasoning::CoT, 5, std::nullopt});
  PatientProfile profile;
  profile.add("ear pain", FactSource::Dialogue);
  const auto ddx = agent.diagnose(profile, std::nullopt, {"Acute otitis media", "URTI"}, {});
  CHECK(ddx.entries.size() == 2);
}

TEST_CASE("prompt assembly includes history, instructions, evidence, and examples") {
  auto backend = std::make_shared<llm::ScriptedChatBackend>("1. URTI");
  llm::ChatClient client = scripted_client(backend);
  std::string captured;
  client.set_observer([&captured](const llm::ChatCallRecord& record) {
    captured = record.request.last_user_content();
  });

  ExampleStore raw =
      ExampleStore::from_cases({toy_case("ex-0", "Other disease", {"example fact"})});
  raw.build_rationales(RationaleMode::Placeholder);
  auto store = std::make_shared<const ExampleStore>(std::move(raw));

  StrategyAgent agent(std::move(client), lib(),
                      StrategyMode{Shots::FewShotStatic, Reasoning::CoT, 5, std::nullopt},
                      store);
  PatientProfile profile;
  profile.add("known fact", FactSource::Dialogue);
  DiagnoseContext context;
  context.previous.push_back(RankedDifferential{{"URTI", "Bronchitis"}, 1});
  context.instructions = {"focus on recent onset"};
  retrieval::EvidenceSummary evidence;
  evidence.text = "the evidence text";
  context.evidence = evidence;
  context.iteration = 2;

  const auto ddx = agent.diagnose(profile, std::nullopt, {"URTI", "Bronchitis"}, context);
  CHECK(ddx.produced_at_iteration == 2);
  CHECK(captured.find("Iteration 1:\n1. URTI\n2. Bronchitis") != std::string::npos);
  CHECK(captured.find("- focus on recent onset") != std::string::npos);
  CHECK(captured.find("the evidence text") != std::string::npos);
  CHECK(captured.find("known fact") != std::string::npos);
  CHECK(captured.find("example fact") != std::string::npos);
  CHECK(captured.find("Reasoning: The reported findings are most consistent with") !=
        std::string::npos);
  CHECK(captured.find("reason step by step") != std::string::npos);
}

TEST_CASE("zero-shot never touches the example store or embedding provider") {
  auto chat = std::make_shared<llm::ScriptedChatBackend>("1. URTI");
  auto embed_backend = std::make_shared<llm::ScriptedEmbeddingBackend>("never");
  auto embeddings = std::make_shared<llm::EmbeddingClient>(embed_backend);
  auto store = std::make_shared<ExampleStore>(store_of(3));

  StrategyAgent agent(scripted_client(chat), lib(),
                      StrategyMode{Shots::ZeroShot, Reasoning::Standard, 5, std::nullopt},
                      store, embeddings);
  PatientProfile profile;
  profile.add("f", FactSource::Dialogue);
  (void)agent.diagnose(profile, std::nullopt, {"URTI"}, {});
  CHECK(embeddings->provider_calls() == 0);
}

TEST_CASE("example store persists with a content hash and detects tampering") {
  const auto dir = std::filesystem::temp_directory_path() / "ddxflow_test_store";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / "store.json";

  ExampleStore store = store_of(3);
  store.build_rationales(RationaleMode::Placeholder);
  store.save(path);

  const ExampleStore loaded = ExampleStore::load(path);
  CHECK(loaded.size() == 3);
  CHECK(loaded.examples()[0].rationale.has_value());
  CHECK(loaded.content_hash() == store.content_hash());

  // a store with non-unit embedding rows is rejected on load
  {
    nlohmann::json j;
    {
      std::ifstream raw(path);
      raw >> j;
    }
    j["entries"][0]["embedding"] = std::vector<double>{3.0, 4.0};
    j["entries"][1]["embedding"] = std::vector<double>{1.0, 0.0};
    j["entries"][2]["embedding"] = std::vector<double>{0.0, 1.0};
    j.erase("content_hash");
    const auto bad_path = dir / "bad_norm.json";
    std::ofstream out2(bad_path);
    out2 << j.dump();
    out2.close();
    CHECK_THROWS_AS(ExampleStore::load(bad_path), Error);
  }

  // flip one byte inside the entries and expect a hash mismatch
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("fact 1");
  REQUIRE(pos != std::string::npos);
  text[pos] = 'g';
  std::ofstream out(path);
  out << text;
  out.close();
  CHECK_THROWS_AS(ExampleStore::load(path), Error);
}
