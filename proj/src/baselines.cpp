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

#include "slmmux/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "slmmux/answer_canon.hpp"
#include "slmmux/mux.hpp"

namespace slmmux {

std::optional<CanonicalAnswer> self_consistency(const SampleSet& samples,
                                                TaskKind task_kind) {
  if (samples.k < 1) throw DomainError("sample set with k < 1");
  return modal_vote(samples.answers, task_kind).answer;
}

std::optional<CanonicalAnswer> pooled_majority(
    std::span<const SampleSet> sample_sets, TaskKind task_kind) {
  std::vector<std::optional<CanonicalAnswer>> pool;
  for (const auto& s : sample_sets) {
    pool.insert(pool.end(), s.answers.begin(), s.answers.end());
  }
  if (pool.empty()) throw DomainError("pooled_majority needs samples");
  return modal_vote(pool, task_kind).answer;
}

double standard_error(double accuracy, std::size_t n_questions) {
  if (n_questions == 0) return 0.0;
  return std::sqrt(accuracy * (1.0 - accuracy) /
                   static_cast<double>(n_questions));
}

std::string_view to_string(SweepAxis axis) {
  return axis == SweepAxis::kModels ? "models" : "samples";
}

double mux_accuracy(const SampleGrid& grid, std::span<const Query> queries,
                    std::span<const ModelProfile> models, int k) {
  if (queries.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& q : queries) {
    if (!q.gold_answer) throw DatasetError("query " + q.id + " has no gold");
    std::vector<ModelVerdict> verdicts;
    for (const auto& m : models) {
      auto it = grid.find({m.model_id, q.id});
      if (it == grid.end()) {
        throw ConfigError("no samples for " + m.model_id + "/" + q.id);
      }
      verdicts.push_back(estimate_confidence(it->second.prefix(k), q.task_kind));
    }
    try {
      const auto d = select_output(verdicts, models);
      correct += answers_equal(d.selected_answer, *q.gold_answer, q.task_kind);
    } catch (const NoAnswerError&) {
      // unanswered counts as wrong
    }
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

std::vector<SweepPoint> sweep_samples(const ProviderClient& client,
                                      std::span<const ModelProfile> models,
                                      std::span<const int> k_values,
                                      std::span<const Query> dataset,
                                      const SamplingConfig& sampling,
                                      int repeats) {
  if (k_values.empty()) return {};
  if (!std::is_sorted(k_values.begin(), k_values.end())) {
    throw ConfigError("k values must be ascending");
  }
  if (k_values.front() < 1) throw ConfigError("k values must be >= 1");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  const int k_max = k_values.back();

  std::vector<SampleGrid> grids;
  for (int r = 0; r < repeats; ++r) {
    SamplingConfig round = sampling;
    round.k = k_max;
    round.sample_offset = sampling.sample_offset + r * k_max;
    grids.push_back(fan_out(client, dataset, models, round));
  }

  std::vector<std::string> subset;
  for (const auto& m : models) subset.push_back(m.model_id);
  std::vector<SweepPoint> points;
  for (int k : k_values) {
    double sum = 0.0;
    for (const auto& g : grids) sum += mux_accuracy(g, dataset, models, k);
    SweepPoint p;
    p.axis = SweepAxis::kSamples;
    p.value = k;
    p.accuracy = sum / repeats;
    p.std_err = standard_error(p.accuracy, dataset.size());
    p.subset = subset;
    p.samples_per_model = k;
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<SweepPoint> sweep_models(const ProviderClient& client,
                                     std::span<const ModelProfile> pool,
                                     std::span<const Query> validation,
                                     std::span<const Query> evaluation,
                                     const ModelSweepConfig& config) {
  const auto matrix =
      build_matrix(client, validation, pool, config.search_sampling,
                   config.search_repeats, config.matrix_options);
  const SampleGrid eval_grid =
      fan_out(client, evaluation, pool, config.eval_sampling);
  const auto eval_matrix = matrix_from_samples(
      evaluation, pool, std::span(&eval_grid, 1), config.matrix_options);

  std::vector<SweepPoint> points;
  for (int K : config.K_values) {
    const auto ranking = exhaustive_search(matrix, K, config.lambda);
    const auto& best = ranking.front();

    std::vector<ModelProfile> chosen;
    for (std::size_t m : best.subset) {
      ModelProfile profile = pool[m];
      profile.validation_accuracy = matrix.modal_accuracy(m);
      chosen.push_back(std::move(profile));
    }
    const double mux =
        mux_accuracy(eval_grid, evaluation, chosen, config.eval_sampling.k);
    const double uni =
        union_accuracy(eval_matrix, subset_of(eval_matrix, best.model_ids));
    for (auto [series, acc] : {std::pair{"mux", mux}, std::pair{"union", uni}}) {
      SweepPoint p;
      p.axis = SweepAxis::kModels;
      p.value = K;
      p.accuracy = acc;
      p.std_err = standard_error(acc, evaluation.size());
      p.subset = best.model_ids;
      p.samples_per_model = config.eval_sampling.k;
      p.series = series;
      points.push_back(std::move(p));
    }
  }
  return points;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
  out << "axis,value,accuracy,std_err,subset,samples_per_model,series\n";
  for (const auto& p : points) {
    std::string subset;
    for (const auto& m : p.subset) {
      if (!subset.empty()) subset += '+';
      subset += m;
    }
    out << to_string(p.axis) << ',' << p.value << ','
        << nlohmann::json(p.accuracy).dump() << ','
        << nlohmann::json(p.std_err).dump() << ',' << subset << ','
        << p.samples_per_model << ',' << p.series << '\n';
  }
}

}  // namespace slmmux
