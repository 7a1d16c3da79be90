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
#ifndef DDXFLOW_LLM_PROVIDER_HPP
#define DDXFLOW_LLM_PROVIDER_HPP

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddx/errors.hpp"
#include "ddx/http.hpp"

namespace ddx::llm {

enum class Role { System, User, Assistant };

std::string to_string(Role role);

struct ChatMessage {
  Role role;
  std::string content;
};

struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::string model_id;

  /// Content of the last user-role message; "" when there is none.
  const std::string& last_user_content() const;

  nlohmann::json to_json() const;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Performs a single completion attempt. Throws Error(TransportError) on
  /// transient transport failures and Error(ConfigError) on setup problems.
  virtual std::string complete(const ChatRequest& request) = 0;

  virtual std::string name() const = 0;
};

/// One scripted rule: first rule whose matcher hits the last user message
/// wins. Responses are consumed in order; the last one repeats.
struct ScriptRule {
  std::string substring;                 // used when regex is absent
  std::optional<std::string> regex;      // ECMAScript regex on the message
  std::vector<std::string> responses;
};

/// Deterministic offline backend: identical request sequences yield
/// identical response sequences.
class ScriptedChatBackend : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::string default_response = "");

  void add_rule(ScriptRule rule);

  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "scripted"; }

  std::size_t call_count() const { return calls_.load(); }

  static std::shared_ptr<ScriptedChatBackend> from_json(const nlohmann::json& j);
  static std::shared_ptr<ScriptedChatBackend> from_file(const std::filesystem::path& path);

 private:
  struct RuleState {
    ScriptRule rule;
    std::size_t consumed = 0;
  };
  std::string default_response_;
  std::vector<RuleState> rules_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mutex_;
};

/// Live chat-completion backend speaking the common JSON shape
/// (POST <base_url>/chat/completions with a messages array).
class HttpChatBackend : public ChatBackend {
 public:
  struct Options {
    std::string base_url;       // e.g. https://api.openai.com/v1
    std::string api_key_env;    // name of the env var holding the credential
    std::string default_model;
  };

  HttpChatBackend(Options options, std::shared_ptr<http::Transport> transport);

  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "http:" + options_.base_url; }

 private:
  Options options_;
  std::shared_ptr<http::Transport> transport_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper default_sleeper();

/// What an observer sees for every finished chat call (tracing hook).
struct ChatCallRecord {
  ChatRequest request;
  std::string response;
  int attempts = 1;
  bool ok = true;
  std::string error;
};

using ChatObserver = std::function<void(const ChatCallRecord&)>;

/// Per-case-run handle around a shared backend: applies the retry policy
/// with exponential backoff and reports each call to the observer.
class ChatClient {
 public:
  ChatClient() = default;
  ChatClient(std::shared_ptr<ChatBackend> backend, RetryPolicy policy = {},
             std::string default_model = {}, Sleeper sleeper = default_sleeper());

  /// Throws Error(TransportError) once retries are exhausted.
  std::string complete(ChatRequest request) const;

  void set_observer(ChatObserver observer) { observer_ = std::move(observer); }
  bool valid() const { return backend_ != nullptr; }
  const std::string& default_model() const { return default_model_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy policy_;
  std::string default_model_;
  Sleeper sleeper_;
  ChatObserver observer_;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Scales to Euclidean norm 1 (within 1e-6), preserving direction.
/// Throws Error(DegenerateVector) for the zero vector.
EmbeddingVector normalize_unit(const EmbeddingVector& v);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual std::string model_id() const = 0;
};

/// Fixed text->vector table for tests.
class ScriptedEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit ScriptedEmbeddingBackend(std::string model_id) : model_id_(std::move(model_id)) {}

  void add(const std::string& text, std::vector<double> vector);
  void set_fallback(std::vector<double> vector) { fallback_ = std::move(vector); }

  EmbeddingVector embed(const std::string& text) override;
  std::string model_id() const override { return model_id_; }

 private:
  std::string model_id_;
  std::map<std::string, std::vector<double>> table_;
  std::optional<std::vector<double>> fallback_;
};

/// Deterministic pseudo-embeddings derived from a content hash; lets the
/// dynamic few-shot path run fully offline.
class HashedEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HashedEmbeddingBackend(int dimension);

  EmbeddingVector embed(const std::string& text) override;
  std::string model_id() const override { return model_id_; }

 private:
  int dimension_;
  std::string model_id_;
};

/// Live embedding endpoint (POST <base_url>/embeddings).
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  struct Options {
    std::string base_url;
    std::string api_key_env;
    std::string model;
  };

  HttpEmbeddingBackend(Options options, std::shared_ptr<http::Transport> transport);

  EmbeddingVector embed(const std::string& text) override;
  std::string model_id() const override { return options_.model; }

 private:
  Options options_;
  std::shared_ptr<http::Transport> transport_;
};

/// FNV-1a 64-bit; used for cache keys and content-hash versioning.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Thread-safe embedding cache keyed by (model_id, exact text). Optionally
/// persistent: one JSON file per entry under cache_dir.
class EmbeddingClient {
 public:
  EmbeddingClient() = default;
  explicit EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend,
                           std::optional<std::filesystem::path> cache_dir = std::nullopt);

  /// Throws Error(InvalidArgument) for empty text.
  EmbeddingVector embed(const std::string& text);

  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::string model_id() const { return backend_ ? backend_->model_id() : ""; }
  bool valid() const { return backend_ != nullptr; }

 private:
  std::optional<EmbeddingVector> load_from_disk(const std::string& text) const;
  void store_to_disk(const std::string& text, const EmbeddingVector& v) const;
  std::filesystem::path entry_path(const std::string& text) const;

  std::shared_ptr<EmbeddingBackend> backend_;
  std::optional<std::filesystem::path> cache_dir_;
  std::map<std::string, EmbeddingVector> memory_;
  std::size_t dimension_ = 0;  // fixed by the first vector seen
  mutable std::mutex mutex_;
  std::atomic<std::size_t> provider_calls_{0};
};

}  // namespace ddx::llm

#endif  // DDXFLOW_LLM_PROVIDER_HPP
