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

#include "slmmux/mux.hpp"

#include <algorithm>

#include "slmmux/answer_canon.hpp"

namespace slmmux {

ModelVerdict estimate_confidence(const SampleSet& samples, TaskKind task_kind) {
  if (samples.k < 1) throw DomainError("sample set with k < 1");
  const ModalVote vote = modal_vote(samples.answers, task_kind);
  return {samples.model_id, vote.answer, Confidence{vote.votes, samples.k}};
}

MuxDecision select_output(std::span<const ModelVerdict> verdicts,
                          std::span<const ModelProfile> profiles) {
  if (verdicts.empty()) throw DomainError("select_output needs verdicts");

  std::vector<const ModelProfile*> profile_of;
  profile_of.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [&](const ModelProfile& p) {
                             return p.model_id == v.model_id;
                           });
    if (it == profiles.end()) {
      throw ConfigError("no profile for model " + v.model_id);
    }
    profile_of.push_back(&*it);
  }

  // Candidates with an answer at the top confidence.
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (!verdicts[i].modal_answer) continue;
    if (tied.empty() || verdicts[i].confidence > verdicts[tied[0]].confidence) {
      tied.assign(1, i);
    } else if (verdicts[i].confidence == verdicts[tied[0]].confidence) {
      tied.push_back(i);
    }
  }
  if (tied.empty()) throw NoAnswerError("no model produced an answer");

  TieBreak used = TieBreak::kNone;
  if (tied.size() > 1) {
    double best_accuracy = -1.0;
    for (std::size_t i : tied) {
      best_accuracy = std::max(best_accuracy, profile_of[i]->validation_accuracy);
    }
    std::erase_if(tied, [&](std::size_t i) {
      return profile_of[i]->validation_accuracy != best_accuracy;
    });
    used = TieBreak::kValidationAccuracy;
  }
  if (tied.size() > 1) {
    used = TieBreak::kDisplayOrder;
  }
  const std::size_t winner = *std::min_element(
      tied.begin(), tied.end(), [&](std::size_t a, std::size_t b) {
        return profile_of[a]->display_order < profile_of[b]->display_order;
      });

  MuxDecision decision{verdicts[winner].model_id,
                       *verdicts[winner].modal_answer,
                       {verdicts.begin(), verdicts.end()},
                       used};
  return decision;
}

std::vector<ModelVerdict> verdicts_for(const SampleGrid& grid,
                                       const Query& query,
                                       std::span<const ModelProfile> models) {
  std::vector<ModelVerdict> verdicts;
  verdicts.reserve(models.size());
  for (const auto& m : models) {
    auto it = grid.find({m.model_id, query.id});
    if (it == grid.end()) {
      throw ConfigError("no samples for model " + m.model_id + ", query " +
                        query.id);
    }
    verdicts.push_back(estimate_confidence(it->second, query.task_kind));
  }
  return verdicts;
}

MuxDecision run_mux(const ProviderClient& client, const Query& query,
                    std::span<const ModelProfile> models,
                    const SamplingConfig& sampling) {
  const SampleGrid grid = fan_out(client, std::span(&query, 1), models, sampling);
  const auto verdicts = verdicts_for(grid, query, models);
  return select_output(verdicts, models);
}

}  // namespace slmmux
