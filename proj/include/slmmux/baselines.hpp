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

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmmux/core.hpp"
#include "slmmux/provider.hpp"
#include "slmmux/search.hpp"

namespace slmmux {

/// Majority answer of one model's samples (ties: smallest rendering).
std::optional<CanonicalAnswer> self_consistency(
    const SampleSet& samples, TaskKind task_kind = TaskKind::kFreeMath);

/// Majority over the union of every model's samples, same tie rule.
std::optional<CanonicalAnswer> pooled_majority(
    std::span<const SampleSet> sample_sets,
    TaskKind task_kind = TaskKind::kFreeMath);

/// sqrt(acc * (1 - acc) / n)
double standard_error(double accuracy, std::size_t n_questions);

enum class SweepAxis { kModels, kSamples };

std::string_view to_string(SweepAxis axis);

struct SweepPoint {
  SweepAxis axis = SweepAxis::kSamples;
  int value = 0;
  double accuracy = 0.0;
  double std_err = 0.0;
  std::vector<std::string> subset;
  int samples_per_model = 0;
  // "mux" or "union" (the model sweep reports both).
  std::string series = "mux";
};

/// Fraction of queries where the confidence-based selection over the
/// first `k` samples of each model matches gold. Unanswered counts wrong.
double mux_accuracy(const SampleGrid& grid, std::span<const Query> queries,
                    std::span<const ModelProfile> models, int k);

/// Samples max(k_values) per model once per repeat and evaluates every k on
/// the leading k samples, so smaller budgets are prefixes of larger ones.
/// Accuracy is the mean over repeats.
std::vector<SweepPoint> sweep_samples(const ProviderClient& client,
                                      std::span<const ModelProfile> models,
                                      std::span<const int> k_values,
                                      std::span<const Query> dataset,
                                      const SamplingConfig& sampling,
                                      int repeats = 1);

struct ModelSweepConfig {
  std::vector<int> K_values;
  double lambda = 1.0;
  SamplingConfig search_sampling;  // validation runs
  int search_repeats = 1;
  MatrixOptions matrix_options;
  SamplingConfig eval_sampling;  // evaluation split
};

/// For each K, takes the top subset from an exhaustive search on the
/// validation split and reports its mux accuracy ("mux" series) and union
/// accuracy ("union" series) on the evaluation split. Validation accuracies
/// used for tie-breaking come from the validation matrix.
std::vector<SweepPoint> sweep_models(const ProviderClient& client,
                                     std::span<const ModelProfile> pool,
                                     std::span<const Query> validation,
                                     std::span<const Query> evaluation,
                                     const ModelSweepConfig& config);

/// Header: axis,value,accuracy,std_err,subset,samples_per_model,series.
/// Subset members are joined with '+'.
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

}  // namespace slmmux
