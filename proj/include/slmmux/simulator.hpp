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
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slmmux/core.hpp"
#include "slmmux/provider.hpp"

namespace slmmux {

/// A model that answers each question correctly with a known probability
/// and otherwise picks uniformly among W fixed wrong alternatives.
struct SyntheticModelSpec {
  std::string model_id;
  double ability = 0.5;
  // Per-question overrides of `ability`, keyed by query id.
  std::map<std::string, double> per_question;
  int wrong_alphabet = 4;
  std::uint64_t seed = 0;

  double ability_for(const std::string& query_id) const;
  double mean_ability() const;
  void validate() const;

  nlohmann::json to_json() const;
  static SyntheticModelSpec from_json(const nlohmann::json& j);
};

/// The W wrong answers for a question. For a non-negative rational gold
/// they are -1..-W, which render before any non-negative number, so
/// frequency ties between gold and a wrong answer go to the wrong one.
std::vector<CanonicalAnswer> wrong_alternatives(const CanonicalAnswer& gold,
                                                int wrong_alphabet);

/// Deterministic in (seed, model_id, query_id, sample_index).
std::string sample_synthetic(const SyntheticModelSpec& spec, const Query& query,
                             int sample_index);

/// CompletionSource over synthetic models. Routes by request.query_id.
class SyntheticEndpoint : public CompletionSource {
 public:
  SyntheticEndpoint(SyntheticModelSpec spec, std::span<const Query> dataset);

  Completion complete(const CompletionRequest& request) override;

 private:
  SyntheticModelSpec spec_;
  std::unordered_map<std::string, Query> queries_;
};

/// Questions "q-0".."q-<n-1>" with gold answers 1..n.
std::vector<Query> synthetic_dataset(int n_questions,
                                     TaskKind kind = TaskKind::kFreeMath);

enum class Aggregator { kMux, kSelfConsistency, kPooled };

std::string_view to_string(Aggregator aggregator);
Aggregator aggregator_from_string(std::string_view text);

struct SyntheticResult {
  double accuracy = 0.0;
  double std_err = 0.0;
  double ci_low = 0.0;   // accuracy - 1.96 std_err, clamped
  double ci_high = 0.0;  // accuracy + 1.96 std_err, clamped
  int n_questions = 0;
  int correct = 0;

  nlohmann::json to_json() const;
};

/// Runs the real pipeline (fan_out, extraction, aggregation) against
/// synthetic endpoints. Self-consistency reports the best single model.
SyntheticResult run_synthetic_experiment(std::span<const SyntheticModelSpec> specs,
                                         int n_questions, int n_samples,
                                         Aggregator aggregator);

}  // namespace slmmux
