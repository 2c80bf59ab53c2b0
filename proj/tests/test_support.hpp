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

// Shared test helpers: random generators, a scriptable OpenAI-compatible
// mock server, and reference implementations written without looking at
// the library code paths they check.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

// Eigen before httplib: <resolv.h> defines a `_res` macro.
#include "slmmux/core.hpp"
#include "slmmux/search.hpp"
#include "httplib.h"
#include "json.hpp"

namespace slmmux::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(SLMMUX_FIXTURES) / name;
}

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("slmmux-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

// --------------------------------------------------------------------------
// Mock OpenAI-compatible server on 127.0.0.1.

class MockOpenAi {
 public:
  struct Reply {
    int status = 200;
    std::string content;
  };
  // Receives the parsed request body and a per-server call number.
  using Handler = std::function<Reply(const nlohmann::json& body, int call)>;

  explicit MockOpenAi(Handler handler) : handler_(std::move(handler)) {
    server_.Post(R"(/v1/chat/completions)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   const int call = calls_++;
                   {
                     std::lock_guard lock(mu_);
                     auth_headers_.push_back(req.get_header_value("Authorization"));
                   }
                   const auto body = nlohmann::json::parse(req.body);
                   const Reply r = handler_(body, call);
                   res.status = r.status;
                   if (r.status == 200) {
                     nlohmann::json out = {
                         {"id", "mock"},
                         {"object", "chat.completion"},
                         {"choices",
                          {{{"index", 0},
                            {"message", {{"role", "assistant"}, {"content", r.content}}},
                            {"finish_reason", "stop"}}}},
                         {"usage",
                          {{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
                     res.set_content(out.dump(), "application/json");
                   } else {
                     res.set_content(R"({"error":"mock"})", "application/json");
                   }
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockOpenAi() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_; }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mu_);
    return auth_headers_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<std::string> auth_headers_;
};

// --------------------------------------------------------------------------
// Reference: the confidence-selection rule by brute force over symbols.
//
// Each model's samples are symbols 0..alphabet-1 or -1 for a failed
// extraction. Symbol s renders as the letter 'A' + s, so "smallest
// rendering" is the smallest symbol.

struct RefMuxResult {
  int model = -1;   // index into the input, -1 when nobody answered
  int symbol = -1;
  int votes = 0;
};

inline RefMuxResult reference_mux(const std::vector<std::vector<int>>& samples,
                                  const std::vector<double>& validation,
                                  const std::vector<int>& display_order) {
  RefMuxResult best;
  int best_k = 1;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    std::map<int, int> freq;
    for (int s : samples[m]) {
      if (s >= 0) ++freq[s];
    }
    if (freq.empty()) continue;
    int sym = -1, votes = 0;
    for (const auto& [s, c] : freq) {  // ascending symbol: first max wins
      if (c > votes) {
        sym = s;
        votes = c;
      }
    }
    const int k = static_cast<int>(samples[m].size());
    bool better = false;
    if (best.model < 0) {
      better = true;
    } else {
      // votes/k vs best.votes/best_k without division.
      const long lhs = static_cast<long>(votes) * best_k;
      const long rhs = static_cast<long>(best.votes) * k;
      if (lhs != rhs) {
        better = lhs > rhs;
      } else if (validation[m] != validation[best.model]) {
        better = validation[m] > validation[best.model];
      } else {
        better = display_order[m] < display_order[best.model];
      }
    }
    if (better) {
      best = {static_cast<int>(m), sym, votes};
      best_k = k;
    }
  }
  return best;
}

// --------------------------------------------------------------------------
// Reference: subset search by bitmask enumeration on raw bool tables.

struct RawMatrix {
  int n_models = 0;
  int n_queries = 0;
  // [model][query]
  std::vector<std::vector<bool>> correct;
  std::vector<std::vector<bool>> wrong_consistent;
};

struct RefScore {
  std::vector<std::size_t> members;
  int hits = 0;
  int contradictions = 0;
};

inline std::vector<RefScore> reference_search(const RawMatrix& m, int K,
                                              double lambda) {
  std::vector<RefScore> all;
  for (unsigned mask = 0; mask < (1u << m.n_models); ++mask) {
    if (std::popcount(mask) != K) continue;
    RefScore s;
    for (int i = 0; i < m.n_models; ++i) {
      if (mask & (1u << i)) s.members.push_back(static_cast<std::size_t>(i));
    }
    for (int q = 0; q < m.n_queries; ++q) {
      bool any_correct = false, any_wrong = false;
      for (auto i : s.members) {
        any_correct = any_correct || m.correct[i][q];
        any_wrong = any_wrong || m.wrong_consistent[i][q];
      }
      s.hits += any_correct;
      s.contradictions += any_correct && any_wrong;
    }
    all.push_back(std::move(s));
  }
  // lambda is a multiple of 1/2 here, so 2*objective is an exact integer.
  const auto twice = [&](const RefScore& s) {
    return 2 * s.hits - static_cast<int>(std::lround(2 * lambda)) * s.contradictions;
  };
  std::sort(all.begin(), all.end(), [&](const RefScore& a, const RefScore& b) {
    if (twice(a) != twice(b)) return twice(a) > twice(b);
    if (a.hits != b.hits) return a.hits > b.hits;
    return a.members < b.members;
  });
  return all;
}

inline RawMatrix random_raw_matrix(std::mt19937_64& rng, int n_models,
                                   int n_queries) {
  RawMatrix m;
  m.n_models = n_models;
  m.n_queries = n_queries;
  m.correct.assign(n_models, std::vector<bool>(n_queries));
  m.wrong_consistent.assign(n_models, std::vector<bool>(n_queries));
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < n_models; ++i) {
    const double skill = u(rng);
    for (int q = 0; q < n_queries; ++q) {
      const bool c = u(rng) < skill;
      m.correct[i][q] = c;
      m.wrong_consistent[i][q] = !c && u(rng) < 0.5;
    }
  }
  return m;
}

inline CorrectnessMatrix to_matrix(const RawMatrix& raw) {
  std::vector<std::string> models, queries;
  for (int i = 0; i < raw.n_models; ++i) models.push_back("m" + std::to_string(i));
  for (int q = 0; q < raw.n_queries; ++q) queries.push_back("q" + std::to_string(q));
  std::vector<CorrectnessRecord> records;
  for (int i = 0; i < raw.n_models; ++i) {
    for (int q = 0; q < raw.n_queries; ++q) {
      CorrectnessRecord r;
      r.model_id = models[i];
      r.query_id = queries[q];
      r.modal_correct = raw.correct[i][q];
      r.consistently_wrong = raw.wrong_consistent[i][q];
      r.consistently_correct = raw.correct[i][q];
      records.push_back(std::move(r));
    }
  }
  return CorrectnessMatrix(models, queries, std::move(records));
}

// --------------------------------------------------------------------------
// Reference: binomial majority by dynamic programming over trials, exact.

inline Rational reference_majority(int n, const Rational& p) {
  std::vector<Rational> dist(n + 1, Rational(0));
  dist[0] = 1;
  const Rational q = Rational(1) - p;
  for (int trial = 0; trial < n; ++trial) {
    for (int k = trial + 1; k >= 0; --k) {
      Rational v = dist[k] * q;
      if (k > 0) v += dist[k - 1] * p;
      dist[k] = v;
    }
  }
  Rational total = 0;
  for (int k = (n + 1) / 2; k <= n; ++k) total += dist[k];
  return total;
}

}  // namespace slmmux::testing
