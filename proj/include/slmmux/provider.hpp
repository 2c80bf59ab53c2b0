/* Copyright 2026 The slmmux Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

#include "slmmux/core.hpp"

namespace slmmux {

inline constexpr int kDefaultMaxTokens = 2048;
inline constexpr int kDefaultConcurrency = 8;

enum class Mode { kLive, kRecord, kReplay };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  /// HTTP status, or 0 for connection-level failures.
  int status() const { return status_; }

 private:
  int status_;
};
class CacheMissError : public Error {
 public:
  using Error::Error;
};
class AuthError : public Error {
 public:
  using Error::Error;
};

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.3;
  int sample_index = 0;
  int max_tokens = kDefaultMaxTokens;
  // Routing metadata for in-process sources; never part of the cache key.
  std::string query_id;

  /// SHA-256 over (model_id, SHA-256(prompt), temperature, sample_index).
  std::string cache_key() const;
};

struct Completion {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct CacheEntry {
  std::string key;
  std::string model_id;
  std::string prompt_sha256;
  double temperature = 0.0;
  int sample_index = 0;
  std::string response_text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::string timestamp;

  nlohmann::json to_json() const;
  static CacheEntry from_json(const nlohmann::json& j);
};

/// Append-only JSON-lines store of recorded completions. One writer, many
/// readers; the first entry for a key wins and is never replaced.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<CacheEntry> find(const std::string& key) const;
  /// Returns false (and writes nothing) when the key is already present.
  bool append(const CacheEntry& entry);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CacheEntry> entries_;
  std::ofstream out_;
};

/// Anything that can turn a request into text: a hosted endpoint, or the
/// simulator's synthetic models.
class CompletionSource {
 public:
  virtual ~CompletionSource() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

struct EndpointConfig {
  std::string base_url;
  std::string api_key;
  // Model name sent on the wire; defaults to the request's model_id.
  std::string remote_model;
  std::chrono::seconds timeout{120};
};

/// Fills base_url/api_key from `<PROVIDER>_BASE_URL` / `<PROVIDER>_API_KEY`.
/// The environment wins over `fallback_base_url`. Throws AuthError when no
/// API key is set.
EndpointConfig endpoint_from_env(std::string_view provider,
                                 std::string fallback_base_url,
                                 std::string remote_model = {});

/// OpenAI-compatible chat completions (POST .../v1/chat/completions).
/// Retries 429, 5xx and connection failures with exponential backoff.
class OpenAiChatEndpoint : public CompletionSource {
 public:
  explicit OpenAiChatEndpoint(EndpointConfig config, RetryPolicy retry = {});

  Completion complete(const CompletionRequest& request) override;

  static nlohmann::json request_body(const CompletionRequest& request,
                                     std::string_view remote_model);
  static Completion parse_response(std::string_view body);

 private:
  EndpointConfig config_;
  RetryPolicy retry_;
  std::string host_;  // scheme://host[:port]
  std::string path_;  // .../chat/completions
};

/// Mode-aware front for all model traffic.
///   live:   source only, nothing persisted
///   record: cached keys are served from the cache; misses go to the
///           source and are appended
///   replay: cache only; a miss is a CacheMissError
class ProviderClient {
 public:
  explicit ProviderClient(Mode mode,
                          std::shared_ptr<ResponseCache> cache = nullptr);

  void register_model(const std::string& model_id,
                      std::shared_ptr<CompletionSource> source,
                      int concurrency_limit = kDefaultConcurrency);
  void set_concurrency_limit(const std::string& model_id, int limit);

  Completion complete(const CompletionRequest& request) const;

  Mode mode() const { return mode_; }
  int concurrency_limit(const std::string& model_id) const;

 private:
  Mode mode_;
  std::shared_ptr<ResponseCache> cache_;
  std::unordered_map<std::string, std::shared_ptr<CompletionSource>> sources_;
  std::unordered_map<std::string, int> limits_;
};

/// Prompt text per task kind; "{question}" is replaced by the query text.
struct PromptTemplates {
  std::string free_math =
      "{question}\n\nSolve the problem step by step and put your final "
      "answer within \\boxed{}.";
  std::string multiple_choice =
      "{question}\n\nThink step by step, then finish with \"The answer is "
      "(X)\" where X is the letter of the correct option.";

  std::string render(const Query& query) const;
  nlohmann::json to_json() const;
};

struct SamplingConfig {
  int k = 3;
  double temperature = 0.3;
  int max_tokens = kDefaultMaxTokens;
  // First sample_index used; repeats take disjoint index ranges.
  int sample_offset = 0;
  PromptTemplates prompts;
};

using SampleKey = std::pair<std::string, std::string>;  // (model_id, query_id)
using SampleGrid = std::map<SampleKey, SampleSet>;

/// k samples for every (model, query) pair, issued concurrently up to each
/// model's limit and assembled by sample_index. Transport failures leave an
/// absent answer in their slot; cache misses and missing credentials abort.
/// Throws TransportError only when every sample failed.
SampleGrid fan_out(const ProviderClient& client, std::span<const Query> queries,
                   std::span<const ModelProfile> models,
                   const SamplingConfig& sampling);

}  // namespace slmmux
