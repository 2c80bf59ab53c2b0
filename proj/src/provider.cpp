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

#include "slmmux/provider.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "slmmux/answer_canon.hpp"

namespace slmmux {
namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kLive:
      return "live";
    case Mode::kRecord:
      return "record";
    case Mode::kReplay:
      return "replay";
  }
  return "live";
}

Mode mode_from_string(std::string_view text) {
  if (text == "live") return Mode::kLive;
  if (text == "record") return Mode::kRecord;
  if (text == "replay") return Mode::kReplay;
  throw ConfigError("unknown mode: " + std::string(text));
}

std::string CompletionRequest::cache_key() const {
  const nlohmann::json tuple = {model_id, sha256_hex(prompt), temperature,
                                sample_index};
  return sha256_hex(tuple.dump());
}

nlohmann::json CacheEntry::to_json() const {
  return {{"key", key},
          {"model_id", model_id},
          {"prompt_sha256", prompt_sha256},
          {"temperature", temperature},
          {"sample_index", sample_index},
          {"response_text", response_text},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens},
          {"timestamp", timestamp}};
}

CacheEntry CacheEntry::from_json(const nlohmann::json& j) {
  CacheEntry e;
  e.key = j.at("key").get<std::string>();
  e.model_id = j.at("model_id").get<std::string>();
  e.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
  e.temperature = j.at("temperature").get<double>();
  e.sample_index = j.at("sample_index").get<int>();
  e.response_text = j.at("response_text").get<std::string>();
  e.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  e.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  e.timestamp = j.value("timestamp", std::string());
  return e;
}

ResponseCache::ResponseCache(std::filesystem::path path)
    : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    CacheEntry entry;
    try {
      entry = CacheEntry::from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path_.string() + ":" + std::to_string(line_no) +
                        ": bad cache entry: " + e.what());
    }
    entries_.try_emplace(entry.key, std::move(entry));
  }
}

std::optional<CacheEntry> ResponseCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

bool ResponseCache::append(const CacheEntry& entry) {
  std::unique_lock lock(mutex_);
  if (entries_.contains(entry.key)) return false;
  if (!out_.is_open()) {
    if (path_.has_parent_path()) {
      std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw ConfigError("cannot open cache for append: " + path_.string());
  }
  out_ << entry.to_json().dump() << '\n';
  out_.flush();
  entries_.emplace(entry.key, entry);
  return true;
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

EndpointConfig endpoint_from_env(std::string_view provider,
                                 std::string fallback_base_url,
                                 std::string remote_model) {
  std::string prefix;
  for (char c : provider) {
    prefix.push_back(std::isalnum(static_cast<unsigned char>(c))
                         ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                         : '_');
  }
  EndpointConfig config;
  config.remote_model = std::move(remote_model);
  const char* key = std::getenv((prefix + "_API_KEY").c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("credentials missing: set " + prefix + "_API_KEY");
  }
  config.api_key = key;
  const char* base = std::getenv((prefix + "_BASE_URL").c_str());
  config.base_url = (base != nullptr && *base != '\0') ? std::string(base)
                                                       : std::move(fallback_base_url);
  if (config.base_url.empty()) {
    throw ConfigError("no base URL for provider " + std::string(provider));
  }
  return config;
}

OpenAiChatEndpoint::OpenAiChatEndpoint(EndpointConfig config, RetryPolicy retry)
    : config_(std::move(config)), retry_(retry) {
  if (config_.api_key.empty()) throw AuthError("credentials missing");
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const std::size_t scheme = url.find("://");
  const std::size_t slash =
      url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "" : url.substr(slash);
  if (path_.ends_with("/chat/completions")) {
    // already a full endpoint path
  } else if (path_.ends_with("/v1")) {
    path_ += "/chat/completions";
  } else {
    path_ += "/v1/chat/completions";
  }
}

nlohmann::json OpenAiChatEndpoint::request_body(const CompletionRequest& request,
                                                std::string_view remote_model) {
  return {{"model", remote_model.empty() ? request.model_id
                                         : std::string(remote_model)},
          {"messages",
           nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

Completion OpenAiChatEndpoint::parse_response(std::string_view body) {
  Completion out;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    out.text = content.is_null() ? std::string() : content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      out.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      out.completion_tokens =
          j["usage"].value("completion_tokens", std::int64_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") +
                         e.what());
  }
  return out;
}

Completion OpenAiChatEndpoint::complete(const CompletionRequest& request) {
  const std::string body = request_body(request, config_.remote_model).dump();
  const httplib::Headers headers = {
      {"Authorization", "Bearer " + config_.api_key}};
  auto backoff = retry_.initial_backoff;
  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<std::int64_t>(
          static_cast<double>(backoff.count()) * retry_.multiplier));
    }
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_response(res->body);
    last_status = res->status;
    last_error = "HTTP " + std::to_string(res->status) + ": " +
                 res->body.substr(0, 200);
    if (res->status == 401 || res->status == 403) throw AuthError(last_error);
    if (!retryable_status(res->status)) break;
  }
  throw TransportError(request.model_id + ": " + last_error, last_status);
}

ProviderClient::ProviderClient(Mode mode, std::shared_ptr<ResponseCache> cache)
    : mode_(mode), cache_(std::move(cache)) {
  if (mode_ != Mode::kLive && !cache_) {
    throw ConfigError(std::string(to_string(mode_)) + " mode needs a cache");
  }
}

void ProviderClient::register_model(const std::string& model_id,
                                    std::shared_ptr<CompletionSource> source,
                                    int concurrency_limit) {
  sources_[model_id] = std::move(source);
  set_concurrency_limit(model_id, concurrency_limit);
}

void ProviderClient::set_concurrency_limit(const std::string& model_id,
                                           int limit) {
  if (limit < 1) throw ConfigError("concurrency limit must be >= 1");
  limits_[model_id] = limit;
}

int ProviderClient::concurrency_limit(const std::string& model_id) const {
  auto it = limits_.find(model_id);
  return it == limits_.end() ? kDefaultConcurrency : it->second;
}

Completion ProviderClient::complete(const CompletionRequest& request) const {
  std::string key;
  if (mode_ != Mode::kLive) {
    key = request.cache_key();
    if (auto hit = cache_->find(key)) {
      return {hit->response_text, hit->prompt_tokens, hit->completion_tokens};
    }
    if (mode_ == Mode::kReplay) {
      throw CacheMissError("no recorded completion for model " +
                           request.model_id + ", query " + request.query_id +
                           ", sample " + std::to_string(request.sample_index));
    }
  }
  auto it = sources_.find(request.model_id);
  if (it == sources_.end()) {
    throw ConfigError("no endpoint registered for model " + request.model_id);
  }
  Completion out = it->second->complete(request);
  if (mode_ == Mode::kRecord) {
    CacheEntry entry;
    entry.key = key;
    entry.model_id = request.model_id;
    entry.prompt_sha256 = sha256_hex(request.prompt);
    entry.temperature = request.temperature;
    entry.sample_index = request.sample_index;
    entry.response_text = out.text;
    entry.prompt_tokens = out.prompt_tokens;
    entry.completion_tokens = out.completion_tokens;
    entry.timestamp = utc_timestamp();
    if (!cache_->append(entry)) {
      // Another request with the same key won the race; serve what was
      // stored so record and replay agree.
      if (auto hit = cache_->find(key)) {
        return {hit->response_text, hit->prompt_tokens, hit->completion_tokens};
      }
    }
  }
  return out;
}

std::string PromptTemplates::render(const Query& query) const {
  std::string out = query.task_kind == TaskKind::kMultipleChoice
                        ? multiple_choice
                        : free_math;
  static constexpr std::string_view kSlot = "{question}";
  if (auto pos = out.find(kSlot); pos != std::string::npos) {
    out.replace(pos, kSlot.size(), query.text);
  } else {
    out = query.text + "\n\n" + out;
  }
  return out;
}

nlohmann::json PromptTemplates::to_json() const {
  return {{"free_math", free_math}, {"multiple_choice", multiple_choice}};
}

SampleGrid fan_out(const ProviderClient& client, std::span<const Query> queries,
                   std::span<const ModelProfile> models,
                   const SamplingConfig& sampling) {
  if (sampling.k < 1) throw ConfigError("k must be >= 1");
  if (models.empty()) throw ConfigError("fan_out needs at least one model");

  const std::size_t k = static_cast<std::size_t>(sampling.k);
  std::vector<std::string> prompts;
  prompts.reserve(queries.size());
  for (const auto& q : queries) prompts.push_back(sampling.prompts.render(q));

  // sets[m * |queries| + q], each pre-sized to k slots.
  std::vector<SampleSet> sets(models.size() * queries.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t q = 0; q < queries.size(); ++q) {
      auto& s = sets[m * queries.size() + q];
      s.model_id = models[m].model_id;
      s.query_id = queries[q].id;
      s.raw_texts.assign(k, std::string());
      s.answers.assign(k, std::nullopt);
      s.temperature = sampling.temperature;
      s.k = sampling.k;
    }
  }
  std::vector<std::int64_t> prompt_tokens(sets.size() * k, 0);
  std::vector<std::int64_t> completion_tokens(sets.size() * k, 0);

  std::atomic<std::size_t> failures{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::exception_ptr fatal;
  std::string first_failure;

  const std::size_t per_model = queries.size() * k;
  const auto run_model = [&](std::size_t m, std::atomic<std::size_t>& next) {
    for (std::size_t task; !abort.load() && (task = next.fetch_add(1)) < per_model;) {
      const std::size_t q = task / k;
      const std::size_t j = task % k;
      auto& set = sets[m * queries.size() + q];
      CompletionRequest req;
      req.model_id = models[m].model_id;
      req.prompt = prompts[q];
      req.temperature = sampling.temperature;
      req.sample_index = sampling.sample_offset + static_cast<int>(j);
      req.max_tokens = sampling.max_tokens;
      req.query_id = queries[q].id;
      try {
        Completion c = client.complete(req);
        set.answers[j] = extract_final_answer(c.text, queries[q].task_kind);
        set.raw_texts[j] = std::move(c.text);
        prompt_tokens[(m * queries.size() + q) * k + j] = c.prompt_tokens;
        completion_tokens[(m * queries.size() + q) * k + j] = c.completion_tokens;
      } catch (const CacheMissError&) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      } catch (const AuthError&) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      } catch (const ConfigError&) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      } catch (const std::exception& e) {
        ++failures;
        std::lock_guard lock(error_mutex);
        if (first_failure.empty()) first_failure = e.what();
      }
    }
  };

  std::vector<std::atomic<std::size_t>> cursors(models.size());
  std::vector<std::thread> workers;
  for (std::size_t m = 0; m < models.size(); ++m) {
    cursors[m] = 0;
    const auto limit = static_cast<std::size_t>(
        std::max(1, client.concurrency_limit(models[m].model_id)));
    const std::size_t n_workers = std::min(limit, std::max<std::size_t>(per_model, 1));
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back(run_model, m, std::ref(cursors[m]));
    }
  }
  for (auto& t : workers) t.join();
  if (fatal) std::rethrow_exception(fatal);

  const std::size_t total = sets.size() * k;
  if (total > 0 && failures.load() == total) {
    throw TransportError("every sample failed; first error: " + first_failure);
  }

  SampleGrid grid;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto& s = sets[i];
    for (std::size_t j = 0; j < k; ++j) {
      s.prompt_tokens += prompt_tokens[i * k + j];
      s.completion_tokens += completion_tokens[i * k + j];
    }
    SampleKey key{s.model_id, s.query_id};
    grid.emplace(std::move(key), std::move(s));
  }
  return grid;
}

}  // namespace slmmux
