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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmmux/core.hpp"
#include "slmmux/provider.hpp"
#include "slmmux/simulator.hpp"

namespace slmmux {

// ---------------------------------------------------------------------------
// Datasets

/// JSON lines, one question per line:
///   {"id"?: str|int, "question": str, "answer": str|num,
///    "subject"?: str, "options"?: [str...] | {"A": str, ...}}
/// Lines with options are multiple-choice. Gold answers go through the same
/// canonicalization as model output; a "#### 42" suffix marks the answer.
/// Bad lines are collected into `line_errors`; more than 1% aborts with a
/// DatasetError that names them.
std::vector<Query> load_dataset(std::istream& in,
                                std::vector<std::string>* line_errors = nullptr);
std::vector<Query> load_dataset(const std::filesystem::path& path,
                                std::vector<std::string>* line_errors = nullptr);

CanonicalAnswer canonicalize_gold(const nlohmann::json& answer, TaskKind kind,
                                  const std::vector<std::string>& options = {});

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
  std::string model_id;
  // Env-var prefix for credentials; "synthetic" selects the simulator.
  std::string provider;
  std::string endpoint;
  std::string remote_model;
  double validation_accuracy = 0.0;
  int concurrency = kDefaultConcurrency;
  std::optional<SyntheticModelSpec> synthetic;
};

/// Experiment configuration file (JSON). Every key is optional except
/// `models`; from_json applies defaults so to_json is fully resolved.
struct ExperimentConfig {
  std::vector<ModelConfig> models;
  int k = 3;
  double temperature = 0.3;
  int max_tokens = kDefaultMaxTokens;
  int repeats = 1;
  double lambda = 1.0;
  double search_temperature = 0.5;
  int search_repeats = 3;
  double consistency_threshold = 1.0;
  std::vector<int> sample_sweep = {2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> model_sweep = {2, 3, 4, 5};
  std::uint64_t seed = 0;
  std::string cache = "cache.jsonl";
  PromptTemplates prompts;
  RetryPolicy retry;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Resolved experiment identity. Execution settings (mode, cache path)
  /// are left out so record and replay runs share a fingerprint.
  nlohmann::json to_json() const;
  std::string fingerprint() const;

  /// display_order follows the order of `models`.
  std::vector<ModelProfile> profiles() const;
  SamplingConfig sampling() const;
  SamplingConfig search_sampling() const;
};

/// Registers every configured model with a client in `mode`. Synthetic
/// models answer from `dataset`; others use OpenAI-compatible endpoints with
/// credentials from the environment (not needed for replay).
ProviderClient make_client(const ExperimentConfig& config, Mode mode,
                           std::span<const Query> dataset,
                           const std::optional<std::filesystem::path>& cache_override = {});

// ---------------------------------------------------------------------------
// Evaluation

enum class Method { kMux, kSelfConsistency, kPooled, kSingle };

std::string_view to_string(Method method);
Method method_from_string(std::string_view text);

struct QuestionDecision {
  std::string query_id;
  int repeat = 0;
  std::optional<CanonicalAnswer> answer;
  std::optional<CanonicalAnswer> gold;
  std::optional<std::string> selected_model;
  bool correct = false;
  std::optional<MuxDecision> mux;

  nlohmann::json to_json() const;
  static QuestionDecision from_json(const nlohmann::json& j);
};

struct RunReport {
  std::string fingerprint;
  Method method = Method::kMux;
  std::vector<std::string> models;
  int k = 0;
  double temperature = 0.0;
  int repeats = 1;
  std::size_t n_questions = 0;
  std::vector<QuestionDecision> decisions;
  double accuracy = 0.0;
  double std_err = 0.0;
  std::map<std::string, double> attribution;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  /// Summary plus the per-question decisions.
  nlohmann::json to_json() const;
  /// One QuestionDecision per line.
  void write_decisions(std::ostream& out) const;
};

/// Runs `method` over the dataset and grades against gold. Repeats use
/// disjoint sample-index ranges; accuracy is correct / (n * repeats) and
/// unanswered questions count wrong. self_consistency and single need
/// exactly one model.
RunReport evaluate(Method method, const ProviderClient& client,
                   std::span<const ModelProfile> models,
                   std::span<const Query> dataset,
                   const SamplingConfig& sampling, int repeats = 1,
                   const std::string& fingerprint = {});

/// Share of answered decisions contributed by each model. Models that
/// never won are present with share 0 when listed in `models`.
std::map<std::string, double> report_attribution(
    std::span<const QuestionDecision> decisions,
    std::span<const std::string> models = {});
std::map<std::string, double> report_attribution(
    std::span<const MuxDecision> decisions,
    std::span<const std::string> models = {});

struct DecisionLogSummary {
  std::size_t decisions = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::map<std::string, double> attribution;

  nlohmann::json to_json() const;
};

/// Recomputes accuracy and attribution from a persisted decision log.
DecisionLogSummary summarize_decision_log(std::istream& in);

}  // namespace slmmux
