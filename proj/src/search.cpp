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

#include "slmmux/search.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "slmmux/answer_canon.hpp"

namespace slmmux {

nlohmann::json CorrectnessRecord::to_json() const {
  return {{"model_id", model_id},
          {"query_id", query_id},
          {"modal_correct", modal_correct},
          {"consistently_wrong", consistently_wrong},
          {"consistently_correct", consistently_correct},
          {"modal_answer",
           modal_answer ? modal_answer->to_json() : nlohmann::json(nullptr)}};
}

CorrectnessRecord CorrectnessRecord::from_json(const nlohmann::json& j) {
  CorrectnessRecord r;
  r.model_id = j.at("model_id").get<std::string>();
  r.query_id = j.at("query_id").get<std::string>();
  r.modal_correct = j.at("modal_correct").get<bool>();
  r.consistently_wrong = j.at("consistently_wrong").get<bool>();
  r.consistently_correct = j.value("consistently_correct", false);
  if (j.contains("modal_answer") && !j["modal_answer"].is_null()) {
    r.modal_answer = CanonicalAnswer::from_json(j["modal_answer"]);
  }
  if (r.consistently_wrong && r.modal_correct) {
    throw ParseError("record " + r.model_id + "/" + r.query_id +
                     " is both consistently wrong and modal-correct");
  }
  return r;
}

CorrectnessMatrix::CorrectnessMatrix(std::vector<std::string> models,
                                     std::vector<std::string> queries,
                                     std::vector<CorrectnessRecord> records)
    : models_(std::move(models)), queries_(std::move(queries)) {
  const auto n_m = static_cast<Eigen::Index>(models_.size());
  const auto n_q = static_cast<Eigen::Index>(queries_.size());
  if (n_m == 0 || n_q == 0) {
    throw DomainError("correctness matrix needs models and queries");
  }
  std::map<std::string, std::size_t> model_at, query_at;
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (!model_at.emplace(models_[i], i).second) {
      throw DomainError("duplicate model " + models_[i]);
    }
  }
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (!query_at.emplace(queries_[i], i).second) {
      throw DomainError("duplicate query " + queries_[i]);
    }
  }

  records_.resize(models_.size() * queries_.size());
  std::vector<bool> filled(records_.size(), false);
  modal_correct_ = Flags::Constant(n_m, n_q, false);
  consistently_wrong_ = Flags::Constant(n_m, n_q, false);
  consistently_correct_ = Flags::Constant(n_m, n_q, false);
  for (auto& r : records) {
    auto m = model_at.find(r.model_id);
    auto q = query_at.find(r.query_id);
    if (m == model_at.end() || q == query_at.end()) {
      throw DomainError("record for unknown cell " + r.model_id + "/" +
                        r.query_id);
    }
    const std::size_t cell = m->second * queries_.size() + q->second;
    if (filled[cell]) {
      throw DomainError("duplicate record " + r.model_id + "/" + r.query_id);
    }
    filled[cell] = true;
    const auto mi = static_cast<Eigen::Index>(m->second);
    const auto qi = static_cast<Eigen::Index>(q->second);
    modal_correct_(mi, qi) = r.modal_correct;
    consistently_wrong_(mi, qi) = r.consistently_wrong;
    consistently_correct_(mi, qi) = r.consistently_correct;
    records_[cell] = std::move(r);
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    throw DomainError("correctness matrix is incomplete");
  }
}

std::size_t CorrectnessMatrix::model_index(const std::string& model_id) const {
  auto it = std::find(models_.begin(), models_.end(), model_id);
  if (it == models_.end()) throw DomainError("unknown model " + model_id);
  return static_cast<std::size_t>(it - models_.begin());
}

double CorrectnessMatrix::modal_accuracy(std::size_t model) const {
  return static_cast<double>(
             modal_correct_.row(static_cast<Eigen::Index>(model)).count()) /
         static_cast<double>(queries_.size());
}

void CorrectnessMatrix::write_jsonl(std::ostream& out) const {
  for (const auto& r : records_) out << r.to_json().dump() << '\n';
}

CorrectnessMatrix CorrectnessMatrix::read_jsonl(std::istream& in) {
  std::vector<std::string> models, queries;
  std::vector<CorrectnessRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(CorrectnessRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("matrix line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    const auto& r = records.back();
    if (std::find(models.begin(), models.end(), r.model_id) == models.end()) {
      models.push_back(r.model_id);
    }
    if (std::find(queries.begin(), queries.end(), r.query_id) == queries.end()) {
      queries.push_back(r.query_id);
    }
  }
  return CorrectnessMatrix(std::move(models), std::move(queries),
                           std::move(records));
}

CorrectnessRecord grade_samples(const SampleSet& samples,
                                const CanonicalAnswer& gold, TaskKind kind,
                                const MatrixOptions& options) {
  if (options.consistency_threshold <= 0.0 ||
      options.consistency_threshold > 1.0) {
    throw ConfigError("consistency threshold must be in (0, 1]");
  }
  CorrectnessRecord r;
  r.model_id = samples.model_id;
  r.query_id = samples.query_id;
  const ModalVote modal = modal_vote(samples.answers, kind);
  r.modal_answer = modal.answer;
  r.modal_correct = modal.answer && answers_equal(*modal.answer, gold, kind);

  std::vector<std::optional<CanonicalAnswer>> wrong;
  bool all_gold = samples.k > 0;
  for (const auto& a : samples.answers) {
    const bool is_gold = a && answers_equal(*a, gold, kind);
    all_gold = all_gold && is_gold;
    if (a && !is_gold) wrong.push_back(a);
  }
  r.consistently_correct = all_gold;
  const int wrong_votes = modal_vote(wrong, kind).votes;
  const int needed = static_cast<int>(
      std::ceil(options.consistency_threshold * samples.k - 1e-9));
  r.consistently_wrong =
      !r.modal_correct && wrong_votes > 0 && wrong_votes >= needed;
  return r;
}

CorrectnessMatrix matrix_from_samples(std::span<const Query> queries,
                                      std::span<const ModelProfile> models,
                                      std::span<const SampleGrid> repeats,
                                      const MatrixOptions& options) {
  if (repeats.empty()) throw ConfigError("need at least one repeat");
  std::vector<std::string> model_ids, query_ids;
  for (const auto& m : models) model_ids.push_back(m.model_id);
  for (const auto& q : queries) {
    if (!q.gold_answer) {
      throw DatasetError("query " + q.id + " has no gold answer");
    }
    query_ids.push_back(q.id);
  }
  const int majority = static_cast<int>(repeats.size()) / 2 + 1;
  std::vector<CorrectnessRecord> records;
  records.reserve(models.size() * queries.size());
  for (const auto& m : models) {
    for (const auto& q : queries) {
      int correct = 0, wrong = 0, unanimous = 0;
      std::optional<CanonicalAnswer> first_modal;
      for (std::size_t r = 0; r < repeats.size(); ++r) {
        auto it = repeats[r].find({m.model_id, q.id});
        if (it == repeats[r].end()) {
          throw ConfigError("repeat " + std::to_string(r) + " lacks samples for " +
                            m.model_id + "/" + q.id);
        }
        const auto rec = grade_samples(it->second, *q.gold_answer, q.task_kind,
                                       options);
        if (r == 0) first_modal = rec.modal_answer;
        correct += rec.modal_correct;
        wrong += rec.consistently_wrong;
        unanimous += rec.consistently_correct;
      }
      CorrectnessRecord folded;
      folded.model_id = m.model_id;
      folded.query_id = q.id;
      folded.modal_correct = correct >= majority;
      folded.consistently_wrong = wrong >= majority;
      folded.consistently_correct = unanimous >= majority;
      folded.modal_answer = std::move(first_modal);
      records.push_back(std::move(folded));
    }
  }
  return CorrectnessMatrix(std::move(model_ids), std::move(query_ids),
                           std::move(records));
}

CorrectnessMatrix build_matrix(const ProviderClient& client,
                               std::span<const Query> queries,
                               std::span<const ModelProfile> models,
                               const SamplingConfig& sampling, int repeats,
                               const MatrixOptions& options) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  for (const auto& q : queries) {
    if (!q.gold_answer) {
      throw DatasetError("query " + q.id + " has no gold answer");
    }
  }
  std::vector<SampleGrid> grids;
  for (int r = 0; r < repeats; ++r) {
    SamplingConfig round = sampling;
    round.sample_offset = sampling.sample_offset + r * sampling.k;
    grids.push_back(fan_out(client, queries, models, round));
  }
  return matrix_from_samples(queries, models, grids, options);
}

Subset subset_of(const CorrectnessMatrix& matrix,
                 std::span<const std::string> model_ids) {
  Subset s;
  for (const auto& id : model_ids) s.push_back(matrix.model_index(id));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

namespace {

void check_subset(const CorrectnessMatrix& matrix, const Subset& subset) {
  if (subset.empty()) throw DomainError("subset must be non-empty");
  for (std::size_t m : subset) {
    if (m >= matrix.n_models()) throw DomainError("subset index out of range");
  }
}

std::vector<Eigen::Index> rows_of(const Subset& subset) {
  return {subset.begin(), subset.end()};
}

}  // namespace

int union_count(const CorrectnessMatrix& matrix, const Subset& subset) {
  check_subset(matrix, subset);
  const auto rows = rows_of(subset);
  return static_cast<int>(
      matrix.modal_correct()(rows, Eigen::all).colwise().any().count());
}

int contradiction_count(const CorrectnessMatrix& matrix, const Subset& subset,
                        CorrectWitness witness) {
  check_subset(matrix, subset);
  const auto rows = rows_of(subset);
  const auto& correct = witness == CorrectWitness::kModal
                            ? matrix.modal_correct()
                            : matrix.consistently_correct();
  const auto some_wrong =
      matrix.consistently_wrong()(rows, Eigen::all).colwise().any();
  const auto some_correct = correct(rows, Eigen::all).colwise().any();
  return static_cast<int>((some_wrong && some_correct).count());
}

double union_accuracy(const CorrectnessMatrix& matrix, const Subset& subset) {
  return static_cast<double>(union_count(matrix, subset)) /
         static_cast<double>(matrix.n_queries());
}

double contradiction_penalty(const CorrectnessMatrix& matrix,
                             const Subset& subset, CorrectWitness witness) {
  return static_cast<double>(contradiction_count(matrix, subset, witness)) /
         static_cast<double>(matrix.n_queries());
}

nlohmann::json SubsetScore::to_json() const {
  return {{"models", model_ids},
          {"union_accuracy", union_acc},
          {"contradiction", contradiction},
          {"lambda", lambda},
          {"objective", objective},
          {"union_hits", union_hits},
          {"contradictions", contradictions},
          {"n_queries", n_queries}};
}

std::vector<SubsetScore> exhaustive_search(const CorrectnessMatrix& matrix,
                                           int K, double lambda,
                                           CorrectWitness witness) {
  const auto n = static_cast<int>(matrix.n_models());
  if (K < 1 || K > n) {
    throw DomainError("K=" + std::to_string(K) + " outside [1, " +
                      std::to_string(n) + "]");
  }
  const auto n_q = static_cast<int>(matrix.n_queries());
  std::vector<SubsetScore> scores;

  Subset subset(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) subset[i] = static_cast<std::size_t>(i);
  while (true) {
    SubsetScore s;
    s.subset = subset;
    for (std::size_t m : subset) s.model_ids.push_back(matrix.models()[m]);
    s.union_hits = union_count(matrix, subset);
    s.contradictions = contradiction_count(matrix, subset, witness);
    s.n_queries = n_q;
    s.union_acc = static_cast<double>(s.union_hits) / n_q;
    s.contradiction = static_cast<double>(s.contradictions) / n_q;
    s.lambda = lambda;
    s.objective = (s.union_hits - lambda * s.contradictions) / n_q;
    scores.push_back(std::move(s));

    // Next combination in lexicographic order.
    int i = K - 1;
    while (i >= 0 && subset[i] == static_cast<std::size_t>(n - K + i)) --i;
    if (i < 0) break;
    ++subset[i];
    for (int j = i + 1; j < K; ++j) subset[j] = subset[j - 1] + 1;
  }

  std::stable_sort(scores.begin(), scores.end(),
                   [](const SubsetScore& a, const SubsetScore& b) {
                     const double oa = a.union_hits - a.lambda * a.contradictions;
                     const double ob = b.union_hits - b.lambda * b.contradictions;
                     if (oa != ob) return oa > ob;
                     if (a.union_hits != b.union_hits) {
                       return a.union_hits > b.union_hits;
                     }
                     return a.subset < b.subset;
                   });
  return scores;
}

}  // namespace slmmux
