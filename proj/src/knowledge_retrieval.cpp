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
#include "ddx/knowledge_retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ddx/core_model.hpp"

namespace ddx::retrieval {

std::string to_string(Source source) {
  return source == Source::Wikipedia ? "wikipedia" : "pubmed";
}

Source source_from_string(std::string_view name) {
  std::string key;
  for (char c : name) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "wikipedia" || key == "wiki") return Source::Wikipedia;
  if (key == "pubmed") return Source::PubMed;
  throw Error(ErrorCode::InvalidArgument, "unknown retrieval source '" + std::string(name) + "'");
}

Throttle::Throttle(double requests_per_second, llm::Sleeper sleeper)
    : min_interval_(requests_per_second > 0
                        ? std::chrono::milliseconds(static_cast<long>(1000.0 / requests_per_second))
                        : std::chrono::milliseconds(0)),
      sleeper_(std::move(sleeper)) {}

void Throttle::acquire(Source source) {
  if (min_interval_.count() == 0) return;
  std::chrono::milliseconds wait{0};
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    auto it = last_.find(source);
    if (it != last_.end()) {
      const auto elapsed =
          std::chrono::duration_cast<std::chrono::milliseconds>(now - it->second);
      if (elapsed < min_interval_) wait = min_interval_ - elapsed;
    }
    last_[source] = now + wait;
  }
  if (wait.count() > 0 && sleeper_) sleeper_(wait);
}

SearchCache::SearchCache(std::filesystem::path dir, std::string day)
    : dir_(std::move(dir)), day_(std::move(day)) {
  std::filesystem::create_directories(dir_);
}

std::string SearchCache::today() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday);
  return buffer;
}

std::filesystem::path SearchCache::entry_path(Source source, const std::string& keyword,
                                              int top_k) const {
  const std::string key =
      to_string(source) + "|" + keyword + "|" + std::to_string(top_k) + "|" + day_;
  return dir_ / (to_string(source) + "-" + llm::hex64(llm::fnv1a64(key)) + ".json");
}

std::optional<std::vector<RetrievedDocument>> SearchCache::get(Source source,
                                                               const std::string& keyword,
                                                               int top_k) const {
  std::lock_guard lock(mutex_);
  std::ifstream in(entry_path(source, keyword, top_k));
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("keyword").get<std::string>() != keyword) return std::nullopt;
    std::vector<RetrievedDocument> docs;
    for (const auto& item : j.at("docs")) {
      RetrievedDocument d;
      d.source = source_from_string(item.at("source").get<std::string>());
      d.title = item.at("title").get<std::string>();
      d.body = item.at("body").get<std::string>();
      d.source_id = item.at("source_id").get<std::string>();
      d.fetched_at = item.value("fetched_at", 0.0);
      docs.push_back(std::move(d));
    }
    return docs;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void SearchCache::put(Source source, const std::string& keyword, int top_k,
                      const std::vector<RetrievedDocument>& docs) const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& d : docs) {
    items.push_back({{"source", to_string(d.source)},
                     {"title", d.title},
                     {"body", d.body},
                     {"source_id", d.source_id},
                     {"fetched_at", d.fetched_at}});
  }
  nlohmann::json j{{"keyword", keyword}, {"top_k", top_k}, {"day", day_}, {"docs", items}};
  std::lock_guard lock(mutex_);
  const auto path = entry_path(source, keyword, top_k);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

RetrievalAgent::RetrievalAgent(llm::ChatClient chat, const prompts::PromptLibrary& prompts,
                               RetrievalConfig config,
                               std::shared_ptr<http::Transport> transport,
                               std::shared_ptr<Throttle> throttle,
                               std::shared_ptr<SearchCache> cache)
    : chat_(std::move(chat)),
      keywords_template_(prompts.text("keywords")),
      synthesis_template_(prompts.text("synthesis")),
      config_(std::move(config)),
      transport_(std::move(transport)),
      throttle_(std::move(throttle)),
      cache_(std::move(cache)) {}

std::vector<std::string> RetrievalAgent::parse_keyword_list(const std::string& reply) {
  const auto open = reply.find('[');
  const auto close = reply.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close <= open) return {};
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = open + 1; i < close; ++i) {
    char c = reply[i];
    if (c == ',') {
      out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(current);
  std::vector<std::string> cleaned;
  for (auto& item : out) {
    std::size_t b = 0, e = item.size();
    while (b < e && (std::isspace(static_cast<unsigned char>(item[b])) || item[b] == '"' ||
                     item[b] == '\''))
      ++b;
    while (e > b && (std::isspace(static_cast<unsigned char>(item[e - 1])) || item[e - 1] == '"' ||
                     item[e - 1] == '\''))
      --e;
    if (e > b) cleaned.push_back(item.substr(b, e - b));
  }
  return cleaned;
}

KeywordSet RetrievalAgent::extract_keywords(const SearchQuery& query) {
  if (query.text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "search query text is empty");
  }
  const std::string prompt = prompts::render_template(
      keywords_template_,
      {{"INPUT_SEARCH", query.text}, {"MAX_KEYWORDS", std::to_string(kMaxKeywords)}});
  llm::ChatRequest request;
  request.messages.push_back({llm::Role::User, prompt});

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply;
    try {
      reply = chat_.complete(request);
    } catch (const Error& e) {
      throw Error(ErrorCode::RetrievalError, std::string("keyword backend: ") + e.what());
    }
    std::vector<std::string> raw = parse_keyword_list(reply);
    KeywordSet set;
    std::set<std::string> seen;
    for (auto& kw : raw) {
      if (static_cast<int>(set.keywords.size()) >= kMaxKeywords) break;
      if (seen.insert(normalize_text(kw)).second) set.keywords.push_back(kw);
    }
    if (!set.keywords.empty()) return set;
    request.messages.push_back({llm::Role::Assistant, reply});
    request.messages.push_back(
        {llm::Role::User,
         "That was not a bracketed list. Respond with the keyword searches as a single "
         "bracketed, comma-separated list and nothing else."});
  }
  throw Error(ErrorCode::RetrievalError, "keyword extraction produced no parseable list");
}

http::Response RetrievalAgent::get_with_retry(const std::string& url) {
  http::Headers headers{{"User-Agent", config_.user_agent}};
  std::chrono::milliseconds delay{50};
  const int attempts = std::max(1, config_.transport_retries);
  for (int attempt = 1;; ++attempt) {
    try {
      http::Response response = transport_->get(url, headers);
      if (response.status == 429 || response.status >= 500) {
        throw Error(ErrorCode::TransportError,
                    "status " + std::to_string(response.status) + " from " + url);
      }
      return response;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError || attempt >= attempts) throw;
      llm::default_sleeper()(delay);
      delay *= 2;
    }
  }
}

std::vector<RetrievedDocument> RetrievalAgent::search(Source source, const KeywordSet& keywords,
                                                      int top_k) {
  if (top_k < 1) {
    throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
  }
  std::vector<RetrievedDocument> merged;
  std::set<std::string> seen_ids;
  const std::size_t cap = static_cast<std::size_t>(top_k) * keywords.keywords.size();
  for (const auto& keyword : keywords.keywords) {
    std::vector<RetrievedDocument> docs;
    if (cache_) {
      if (auto cached = cache_->get(source, keyword, top_k)) {
        docs = std::move(*cached);
      }
    }
    if (docs.empty()) {
      try {
        docs = source == Source::Wikipedia ? fetch_wikipedia(keyword, top_k)
                                           : fetch_pubmed(keyword, top_k);
      } catch (const Error& e) {
        throw Error(ErrorCode::RetrievalError,
                    "search for '" + keyword + "' failed: " + e.what());
      }
      if (cache_ && !docs.empty()) cache_->put(source, keyword, top_k, docs);
    }
    for (auto& doc : docs) {
      if (merged.size() >= cap) break;
      if (seen_ids.insert(normalize_text(doc.source_id)).second) {
        merged.push_back(std::move(doc));
      }
    }
  }
  return merged;
}

std::vector<RetrievedDocument> RetrievalAgent::search_wikipedia(const KeywordSet& keywords,
                                                                int top_k) {
  return search(Source::Wikipedia, keywords, top_k);
}

std::vector<RetrievedDocument> RetrievalAgent::search_pubmed(const KeywordSet& keywords,
                                                             int top_k) {
  return search(Source::PubMed, keywords, top_k);
}

std::vector<RetrievedDocument> RetrievalAgent::fetch_wikipedia(const std::string& keyword,
                                                               int top_k) {
  if (throttle_) throttle_->acquire(Source::Wikipedia);
  const std::string search_url = config_.wikipedia_endpoint +
                                 "?action=query&list=search&format=json&srlimit=" +
                                 std::to_string(top_k) +
                                 "&srsearch=" + http::url_encode(keyword);
  http::Response response = get_with_retry(search_url);
  std::vector<std::string> titles;
  try {
    nlohmann::json j = nlohmann::json::parse(response.body);
    for (const auto& hit : j.at("query").at("search")) {
      titles.push_back(hit.at("title").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("bad wiki search response: ") + e.what());
  }
  if (titles.empty()) return {};

  std::string joined;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i) joined += "|";
    joined += titles[i];
  }
  if (throttle_) throttle_->acquire(Source::Wikipedia);
  const std::string extract_url =
      config_.wikipedia_endpoint +
      "?action=query&prop=extracts&exintro=1&explaintext=1&format=json&titles=" +
      http::url_encode(joined);
  http::Response pages = get_with_retry(extract_url);
  std::vector<RetrievedDocument> docs;
  try {
    nlohmann::json j = nlohmann::json::parse(pages.body);
    for (const auto& [_, page] : j.at("query").at("pages").items()) {
      RetrievedDocument d;
      d.source = Source::Wikipedia;
      d.title = page.value("title", "");
      d.body = page.value("extract", "");
      d.source_id = d.title;
      if (!d.title.empty() && !d.body.empty()) docs.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("bad wiki extract response: ") + e.what());
  }
  // preserve the search ranking; page objects arrive keyed by page id
  std::stable_sort(docs.begin(), docs.end(),
                   [&titles](const RetrievedDocument& a, const RetrievedDocument& b) {
                     auto pos = [&titles](const std::string& t) {
                       return std::find(titles.begin(), titles.end(), t) - titles.begin();
                     };
                     return pos(a.title) < pos(b.title);
                   });
  return docs;
}

namespace {

std::string strip_xml_tags(const std::string& text) {
  std::string out;
  bool in_tag = false;
  for (char c : text) {
    if (c == '<') {
      in_tag = true;
    } else if (c == '>') {
      in_tag = false;
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  // minimal entity decoding
  static const std::pair<const char*, const char*> entities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}};
  for (const auto& [from, to] : entities) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, std::strlen(from), to);
      pos += std::strlen(to);
    }
  }
  return out;
}

/// Returns the inner text of the first <tag ...>...</tag> at or after from;
/// sets *next to just past the closing tag. Empty string when absent.
std::string first_tag_text(const std::string& xml, const std::string& tag, std::size_t from,
                           std::size_t* next = nullptr) {
  const std::string open = "<" + tag;
  const std::string close = "</" + tag + ">";
  std::size_t begin = xml.find(open, from);
  if (begin == std::string::npos) return "";
  begin = xml.find('>', begin);
  if (begin == std::string::npos) return "";
  ++begin;
  const std::size_t end = xml.find(close, begin);
  if (end == std::string::npos) return "";
  if (next) *next = end + close.size();
  return strip_xml_tags(xml.substr(begin, end - begin));
}

}  // namespace

std::vector<RetrievedDocument> RetrievalAgent::fetch_pubmed(const std::string& keyword,
                                                            int top_k) {
  std::string term = keyword;
  if (config_.pubmed_full_text_only) {
    // restrict to the freely readable full-text subset
    term += " AND free full text[sb]";
  }
  std::string key_param;
  if (!config_.pubmed_api_key_env.empty()) {
    if (const char* key = std::getenv(config_.pubmed_api_key_env.c_str())) {
      if (*key) key_param = "&api_key=" + http::url_encode(key);
    }
  }
  if (throttle_) throttle_->acquire(Source::PubMed);
  const std::string search_url = config_.pubmed_endpoint +
                                 "/esearch.fcgi?db=pubmed&retmode=json&retmax=" +
                                 std::to_string(top_k) + key_param +
                                 "&term=" + http::url_encode(term);
  http::Response response = get_with_retry(search_url);
  std::vector<std::string> ids;
  try {
    nlohmann::json j = nlohmann::json::parse(response.body);
    for (const auto& id : j.at("esearchresult").at("idlist")) {
      ids.push_back(id.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError, std::string("bad esearch response: ") + e.what());
  }
  if (ids.empty()) return {};

  std::string joined;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) joined += ",";
    joined += ids[i];
  }
  if (throttle_) throttle_->acquire(Source::PubMed);
  const std::string fetch_url = config_.pubmed_endpoint +
                                "/efetch.fcgi?db=pubmed&rettype=abstract&retmode=xml" +
                                key_param + "&id=" + http::url_encode(joined);
  http::Response fetched = get_with_retry(fetch_url);

  std::vector<RetrievedDocument> docs;
  std::size_t cursor = 0;
  const std::string& xml = fetched.body;
  while (true) {
    std::size_t article_begin = xml.find("<PubmedArticle", cursor);
    if (article_begin == std::string::npos) break;
    std::size_t article_end = xml.find("</PubmedArticle>", article_begin);
    if (article_end == std::string::npos) break;
    const std::string block = xml.substr(article_begin, article_end - article_begin);
    cursor = article_end + 1;

    RetrievedDocument d;
    d.source = Source::PubMed;
    d.source_id = first_tag_text(block, "PMID", 0);
    d.title = first_tag_text(block, "ArticleTitle", 0);
    std::string abstract_text;
    std::size_t pos = 0;
    while (true) {
      std::size_t next = 0;
      std::string part = first_tag_text(block, "AbstractText", pos, &next);
      if (part.empty()) break;
      if (!abstract_text.empty()) abstract_text += "\n";
      abstract_text += part;
      pos = next;
    }
    d.body = abstract_text;
    if (!d.source_id.empty() && !d.body.empty()) docs.push_back(std::move(d));
  }
  return docs;
}

EvidenceSummary RetrievalAgent::synthesize(const SearchQuery& query,
                                           const std::vector<RetrievedDocument>& docs) {
  if (docs.empty()) {
    return EvidenceSummary{kNoEvidenceSummary, {}, query};
  }
  std::ostringstream results;
  std::vector<std::string> cited;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i) results << "\n\n";
    results << (i + 1) << ". [" << to_string(docs[i].source) << ":" << docs[i].source_id
            << "] " << docs[i].title << "\n"
            << docs[i].body;
    cited.push_back(docs[i].source_id);
  }
  std::string options_block = "None.";
  if (query.diagnosis_options && !query.diagnosis_options->empty()) {
    options_block.clear();
    for (const auto& option : *query.diagnosis_options) {
      if (!options_block.empty()) options_block += "\n";
      options_block += "- " + option;
    }
  }
  const std::string prompt = prompts::render_template(
      synthesis_template_, {{"INPUT_SEARCH", query.text},
                            {"SEARCH_RESULTS", results.str()},
                            {"DIAGNOSIS_OPTIONS", options_block}});
  llm::ChatRequest request;
  request.messages.push_back({llm::Role::User, prompt});
  try {
    return EvidenceSummary{chat_.complete(request), std::move(cited), query};
  } catch (const Error& e) {
    throw Error(ErrorCode::RetrievalError, std::string("synthesis backend: ") + e.what());
  }
}

EvidenceSummary RetrievalAgent::run(const SearchQuery& query) {
  KeywordSet keywords = extract_keywords(query);
  std::vector<RetrievedDocument> docs = search(query.source, keywords, config_.top_k);
  return synthesize(query, docs);
}

}  // namespace ddx::retrieval
