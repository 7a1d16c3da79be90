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
#ifndef DDXFLOW_KNOWLEDGE_RETRIEVAL_HPP
#define DDXFLOW_KNOWLEDGE_RETRIEVAL_HPP

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ddx/http.hpp"
#include "ddx/llm_provider.hpp"
#include "ddx/prompts.hpp"

namespace ddx::retrieval {

inline constexpr int kMaxKeywords = 3;
inline constexpr const char* kNoEvidenceSummary =
    "No relevant evidence was found for this query.";

enum class Source { Wikipedia, PubMed };

std::string to_string(Source source);
Source source_from_string(std::string_view name);

struct SearchQuery {
  std::string text;
  Source source = Source::Wikipedia;
  std::optional<std::vector<std::string>> diagnosis_options;
};

struct KeywordSet {
  std::vector<std::string> keywords;  // 1..3, unique
};

struct RetrievedDocument {
  Source source = Source::Wikipedia;
  std::string title;
  std::string body;
  std::string source_id;  // page title or PubMed ID
  double fetched_at = 0.0;
};

struct EvidenceSummary {
  std::string text;
  std::vector<std::string> cited_documents;
  SearchQuery query;
};

/// Global per-source request-rate limiter shared by all case-runs.
class Throttle {
 public:
  Throttle(double requests_per_second, llm::Sleeper sleeper = llm::default_sleeper());

  void acquire(Source source);

 private:
  std::chrono::milliseconds min_interval_;
  llm::Sleeper sleeper_;
  std::mutex mutex_;
  std::map<Source, std::chrono::steady_clock::time_point> last_;
};

/// Day-scoped on-disk cache of search results, keyed by
/// (source, keyword, top_k, day). Safe under concurrent access.
class SearchCache {
 public:
  explicit SearchCache(std::filesystem::path dir, std::string day = today());

  std::optional<std::vector<RetrievedDocument>> get(Source source, const std::string& keyword,
                                                    int top_k) const;
  void put(Source source, const std::string& keyword, int top_k,
           const std::vector<RetrievedDocument>& docs) const;

  static std::string today();

 private:
  std::filesystem::path entry_path(Source source, const std::string& keyword, int top_k) const;

  std::filesystem::path dir_;
  std::string day_;
  mutable std::mutex mutex_;
};

struct RetrievalConfig {
  Source source = Source::Wikipedia;
  int top_k = 3;  // per keyword
  std::string wikipedia_endpoint = "https://en.wikipedia.org/w/api.php";
  std::string pubmed_endpoint = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
  std::string pubmed_api_key_env;  // optional NCBI key
  bool pubmed_full_text_only = true;
  std::string user_agent = "ddxflow/1.0 (research tool)";
  int transport_retries = 3;
};

/// The retrieval pipeline: keywords -> source search -> evidence synthesis.
class RetrievalAgent {
 public:
  RetrievalAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts,
                 RetrievalConfig config, std::shared_ptr<http::Transport> transport,
                 std::shared_ptr<Throttle> throttle = nullptr,
                 std::shared_ptr<SearchCache> cache = nullptr);

  /// Chat-extracted, deduplicated, truncated to kMaxKeywords. One re-prompt
  /// on an unparseable reply, then Error(RetrievalError).
  KeywordSet extract_keywords(const SearchQuery& query);

  std::vector<RetrievedDocument> search_wikipedia(const KeywordSet& keywords, int top_k);
  std::vector<RetrievedDocument> search_pubmed(const KeywordSet& keywords, int top_k);

  /// Empty docs short-circuit to kNoEvidenceSummary without a backend call.
  EvidenceSummary synthesize(const SearchQuery& query,
                             const std::vector<RetrievedDocument>& docs);

  /// Full pipeline for one driver-formulated query.
  EvidenceSummary run(const SearchQuery& query);

  /// Parses "[kw1, kw2]" replies; exposed for tests.
  static std::vector<std::string> parse_keyword_list(const std::string& reply);

 private:
  std::vector<RetrievedDocument> search(Source source, const KeywordSet& keywords, int top_k);
  std::vector<RetrievedDocument> fetch_wikipedia(const std::string& keyword, int top_k);
  std::vector<RetrievedDocument> fetch_pubmed(const std::string& keyword, int top_k);
  http::Response get_with_retry(const std::string& url);

  llm::ChatClient chat_;
  std::string keywords_template_;
  std::string synthesis_template_;
  RetrievalConfig config_;
  std::shared_ptr<http::Transport> transport_;
  std::shared_ptr<Throttle> throttle_;
  std::shared_ptr<SearchCache> cache_;
};

}  // namespace ddx::retrieval

#endif  // DDXFLOW_KNOWLEDGE_RETRIEVAL_HPP
