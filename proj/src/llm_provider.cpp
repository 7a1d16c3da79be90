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
#include "ddx/llm_provider.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <thread>

namespace ddx::llm {

std::string to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "unknown";
}

const std::string& ChatRequest::last_user_content() const {
  static const std::string empty;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return empty;
}

nlohmann::json ChatRequest::to_json() const {
  nlohmann::json msgs = nlohmann::json::array();
  if (!system_prompt.empty()) {
    msgs.push_back({{"role", "system"}, {"content", system_prompt}});
  }
  for (const auto& m : messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return nlohmann::json{{"model", model_id},
                        {"messages", msgs},
                        {"temperature", temperature},
                        {"max_tokens", max_output_tokens}};
}

ScriptedChatBackend::ScriptedChatBackend(std::string default_response)
    : default_response_(std::move(default_response)) {}

void ScriptedChatBackend::add_rule(ScriptRule rule) {
  rules_.push_back(RuleState{std::move(rule), 0});
}

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  calls_.fetch_add(1);
  const std::string& message = request.last_user_content();
  for (auto& state : rules_) {
    bool hit = false;
    if (state.rule.regex) {
      try {
        hit = std::regex_search(message, std::regex(*state.rule.regex));
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::ConfigError,
                    std::string("bad script rule regex: ") + e.what());
      }
    } else {
      hit = message.find(state.rule.substring) != std::string::npos;
    }
    if (!hit) continue;
    const auto& responses = state.rule.responses;
    if (responses.empty()) return default_response_;
    std::size_t index = std::min(state.consumed, responses.size() - 1);
    ++state.consumed;
    return responses[index];
  }
  return default_response_;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_json(const nlohmann::json& j) {
  auto backend = std::make_shared<ScriptedChatBackend>(j.value("default_response", ""));
  if (j.contains("rules")) {
    for (const auto& item : j.at("rules")) {
      ScriptRule rule;
      rule.substring = item.value("match", "");
      if (item.contains("regex")) rule.regex = item.at("regex").get<std::string>();
      if (item.contains("responses")) {
        rule.responses = item.at("responses").get<std::vector<std::string>>();
      } else if (item.contains("response")) {
        rule.responses = {item.at("response").get<std::string>()};
      }
      backend->add_rule(std::move(rule));
    }
  }
  return backend;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError, "cannot open script file " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "script file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

HttpChatBackend::HttpChatBackend(Options options, std::shared_ptr<http::Transport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  const char* key = nullptr;
  if (!options_.api_key_env.empty()) {
    key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::ConfigError,
                  "credential env var " + options_.api_key_env + " is not set");
    }
  }

  ChatRequest effective = request;
  if (effective.model_id.empty()) effective.model_id = options_.default_model;

  http::Headers headers;
  if (key != nullptr) headers["Authorization"] = std::string("Bearer ") + key;

  const std::string url = options_.base_url + "/chat/completions";
  http::Response response =
      transport_->post(url, headers, effective.to_json().dump(), "application/json");

  if (response.status == 429 || response.status >= 500) {
    throw Error(ErrorCode::TransportError,
                "chat endpoint returned " + std::to_string(response.status));
  }
  if (response.status != 200) {
    throw Error(ErrorCode::ConfigError,
                "chat endpoint returned " + std::to_string(response.status) + ": " +
                    response.body.substr(0, 200));
  }

  try {
    nlohmann::json j = nlohmann::json::parse(response.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError,
                std::string("malformed chat completion response: ") + e.what());
  }
}

Sleeper default_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy policy,
                       std::string default_model, Sleeper sleeper)
    : backend_(std::move(backend)),
      policy_(policy),
      default_model_(std::move(default_model)),
      sleeper_(std::move(sleeper)) {}

std::string ChatClient::complete(ChatRequest request) const {
  if (!backend_) {
    throw Error(ErrorCode::ConfigError, "no chat backend configured");
  }
  if (request.model_id.empty()) request.model_id = default_model_;
  if (request.messages.empty()) {
    throw Error(ErrorCode::InvalidArgument, "chat request without messages");
  }

  std::chrono::milliseconds delay = policy_.initial_delay;
  int attempt = 0;
  for (;;) {
    ++attempt;
    try {
      std::string response = backend_->complete(request);
      if (observer_) {
        observer_(ChatCallRecord{request, response, attempt, true, ""});
      }
      return response;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError || attempt >= policy_.max_attempts) {
        if (observer_) {
          observer_(ChatCallRecord{request, "", attempt, false, e.what()});
        }
        throw;
      }
      if (sleeper_) sleeper_(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * policy_.multiplier));
    }
  }
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "dot: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) sum += a.values[i] * b.values[i];
  return sum;
}

double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "l2_distance: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

EmbeddingVector normalize_unit(const EmbeddingVector& v) {
  double norm_sq = 0.0;
  for (double x : v.values) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (!(norm > 1e-12)) {
    throw Error(ErrorCode::DegenerateVector, "cannot normalize a zero vector");
  }
  EmbeddingVector out = v;
  for (double& x : out.values) x /= norm;
  return out;
}

void ScriptedEmbeddingBackend::add(const std::string& text, std::vector<double> vector) {
  table_[text] = std::move(vector);
}

EmbeddingVector ScriptedEmbeddingBackend::embed(const std::string& text) {
  auto it = table_.find(text);
  if (it != table_.end()) return EmbeddingVector{it->second, model_id_};
  if (fallback_) return EmbeddingVector{*fallback_, model_id_};
  throw Error(ErrorCode::TransportError, "scripted embedding has no entry for text");
}

HashedEmbeddingBackend::HashedEmbeddingBackend(int dimension)
    : dimension_(dimension), model_id_("hashed-" + std::to_string(dimension)) {
  if (dimension < 1) {
    throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
  }
}

EmbeddingVector HashedEmbeddingBackend::embed(const std::string& text) {
  std::mt19937_64 rng(fnv1a64(text));
  std::vector<double> values(static_cast<std::size_t>(dimension_));
  for (double& x : values) {
    // map to [-1, 1); mt19937_64 output is standardized, so this is portable
    x = static_cast<double>(rng() >> 11) / static_cast<double>(1ULL << 52) - 1.0;
  }
  return normalize_unit(EmbeddingVector{std::move(values), model_id_});
}

HttpEmbeddingBackend::HttpEmbeddingBackend(Options options,
                                           std::shared_ptr<http::Transport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {}

EmbeddingVector HttpEmbeddingBackend::embed(const std::string& text) {
  http::Headers headers;
  if (!options_.api_key_env.empty()) {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::ConfigError,
                  "credential env var " + options_.api_key_env + " is not set");
    }
    headers["Authorization"] = std::string("Bearer ") + key;
  }
  nlohmann::json body{{"model", options_.model}, {"input", text}};
  http::Response response = transport_->post(options_.base_url + "/embeddings", headers,
                                             body.dump(), "application/json");
  if (response.status == 429 || response.status >= 500) {
    throw Error(ErrorCode::TransportError,
                "embedding endpoint returned " + std::to_string(response.status));
  }
  if (response.status != 200) {
    throw Error(ErrorCode::ConfigError,
                "embedding endpoint returned " + std::to_string(response.status));
  }
  try {
    nlohmann::json j = nlohmann::json::parse(response.body);
    return EmbeddingVector{j.at("data").at(0).at("embedding").get<std::vector<double>>(),
                           options_.model};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::TransportError,
                std::string("malformed embedding response: ") + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend,
                                 std::optional<std::filesystem::path> cache_dir)
    : backend_(std::move(backend)), cache_dir_(std::move(cache_dir)) {
  if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
}

std::filesystem::path EmbeddingClient::entry_path(const std::string& text) const {
  std::string model = backend_->model_id();
  for (char& c : model) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return *cache_dir_ / (model + "-" + hex64(fnv1a64(text)) + ".json");
}

std::optional<EmbeddingVector> EmbeddingClient::load_from_disk(const std::string& text) const {
  std::ifstream in(entry_path(text));
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("text").get<std::string>() != text) return std::nullopt;  // hash collision
    return EmbeddingVector{j.at("values").get<std::vector<double>>(),
                           j.at("model_id").get<std::string>()};
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void EmbeddingClient::store_to_disk(const std::string& text, const EmbeddingVector& v) const {
  nlohmann::json j{{"model_id", v.model_id}, {"text", text}, {"values", v.values}};
  const auto path = entry_path(text);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

EmbeddingVector EmbeddingClient::embed(const std::string& text) {
  if (!backend_) {
    throw Error(ErrorCode::ConfigError, "no embedding backend configured");
  }
  if (text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  }
  {
    std::lock_guard lock(mutex_);
    auto it = memory_.find(text);
    if (it != memory_.end()) return it->second;
    if (cache_dir_) {
      if (auto cached = load_from_disk(text)) {
        memory_[text] = *cached;
        return *cached;
      }
    }
  }
  EmbeddingVector v = backend_->embed(text);
  provider_calls_.fetch_add(1);
  {
    std::lock_guard lock(mutex_);
    if (dimension_ == 0) {
      dimension_ = v.values.size();
    } else if (v.values.size() != dimension_) {
      throw Error(ErrorCode::TransportError,
                  "embedding dimension changed from " + std::to_string(dimension_) + " to " +
                      std::to_string(v.values.size()) + " for model " + v.model_id);
    }
    memory_[text] = v;
    if (cache_dir_) store_to_disk(text, v);
  }
  return v;
}

}  // namespace ddx::llm
