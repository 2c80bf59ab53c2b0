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

#include <Eigen/Dense>

#include "slmmux/core.hpp"
#include "slmmux/provider.hpp"

namespace slmmux {

struct CorrectnessRecord {
  std::string model_id;
  std::string query_id;
  bool modal_correct = false;
  bool consistently_wrong = false;
  // Every sample agrees on the gold answer. Only used by the alternative
  // contradiction witness.
  bool consistently_correct = false;
  std::optional<CanonicalAnswer> modal_answer;

  nlohmann::json to_json() const;
  static CorrectnessRecord from_json(const nlohmann::json& j);
};

struct MatrixOptions {
  // Fraction of the k samples that must agree on one wrong answer for the
  // cell to count as consistently wrong. 1.0 means all k, all present.
  double consistency_threshold = 1.0;
};

/// Which "correct" member witnesses a contradiction.
enum class CorrectWitness { kModal, kConsistent };

/// Dense model x query table of graded validation runs.
class CorrectnessMatrix {
 public:
  using Flags = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

  /// `records` may come in any order but must fill every cell exactly once.
  CorrectnessMatrix(std::vector<std::string> models,
                    std::vector<std::string> queries,
                    std::vector<CorrectnessRecord> records);

  const std::vector<std::string>& models() const { return models_; }
  const std::vector<std::string>& queries() const { return queries_; }
  std::size_t n_models() const { return models_.size(); }
  std::size_t n_queries() const { return queries_.size(); }

  const CorrectnessRecord& record(std::size_t model, std::size_t query) const {
    return records_[model * queries_.size() + query];
  }
  const Flags& modal_correct() const { return modal_correct_; }
  const Flags& consistently_wrong() const { return consistently_wrong_; }
  const Flags& consistently_correct() const { return consistently_correct_; }

  std::size_t model_index(const std::string& model_id) const;
  double modal_accuracy(std::size_t model) const;

  /// One CorrectnessRecord per line, model-major.
  void write_jsonl(std::ostream& out) const;
  static CorrectnessMatrix read_jsonl(std::istream& in);

 private:
  std::vector<std::string> models_;
  std::vector<std::string> queries_;
  std::vector<CorrectnessRecord> records_;
  Flags modal_correct_;
  Flags consistently_wrong_;
  Flags consistently_correct_;
};

CorrectnessRecord grade_samples(const SampleSet& samples,
                                const CanonicalAnswer& gold, TaskKind kind,
                                const MatrixOptions& options = {});

/// Grades each repeat and folds them: a flag holds when it holds in a
/// strict majority of repeats. The modal answer comes from the first repeat.
CorrectnessMatrix matrix_from_samples(std::span<const Query> queries,
                                      std::span<const ModelProfile> models,
                                      std::span<const SampleGrid> repeats,
                                      const MatrixOptions& options = {});

/// Samples `repeats` disjoint rounds of k (sample indices r*k .. r*k+k-1
/// past sampling.sample_offset) and grades them against gold.
CorrectnessMatrix build_matrix(const ProviderClient& client,
                               std::span<const Query> queries,
                               std::span<const ModelProfile> models,
                               const SamplingConfig& sampling, int repeats,
                               const MatrixOptions& options = {});

/// Ascending model indices into a CorrectnessMatrix.
using Subset = std::vector<std::size_t>;

Subset subset_of(const CorrectnessMatrix& matrix,
                 std::span<const std::string> model_ids);

int union_count(const CorrectnessMatrix& matrix, const Subset& subset);
int contradiction_count(const CorrectnessMatrix& matrix, const Subset& subset,
                        CorrectWitness witness = CorrectWitness::kModal);

/// Fraction of queries solved (modal-correct) by at least one member.
double union_accuracy(const CorrectnessMatrix& matrix, const Subset& subset);
/// Fraction of queries with a consistently wrong member and a correct one.
double contradiction_penalty(const CorrectnessMatrix& matrix,
                             const Subset& subset,
                             CorrectWitness witness = CorrectWitness::kModal);

struct SubsetScore {
  Subset subset;
  std::vector<std::string> model_ids;
  int union_hits = 0;
  int contradictions = 0;
  int n_queries = 0;
  double union_acc = 0.0;
  double contradiction = 0.0;
  double lambda = 1.0;
  double objective = 0.0;

  nlohmann::json to_json() const;
};

/// Scores every size-K subset by union_acc - lambda * contradiction and
/// ranks them: objective descending, then union accuracy descending, then
/// lexicographic on model indices.
std::vector<SubsetScore> exhaustive_search(
    const CorrectnessMatrix& matrix, int K, double lambda = 1.0,
    CorrectWitness witness = CorrectWitness::kModal);

}  // namespace slmmux
