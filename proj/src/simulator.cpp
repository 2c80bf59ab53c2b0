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

#include "slmmux/simulator.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <array>
#include <cstring>

#include "slmmux/answer_canon.hpp"
#include "slmmux/baselines.hpp"
#include "slmmux/mux.hpp"

namespace slmmux {
namespace {

struct Draw {
  double uniform;       // [0, 1)
  std::uint64_t pick;   // wrong-answer index source
  std::uint64_t style;  // phrasing source
};

Draw keyed_draw(std::uint64_t seed, const std::string& model_id,
                const std::string& query_id, int sample_index) {
  const std::string material = std::to_string(seed) + '\x1f' + model_id +
                               '\x1f' + query_id + '\x1f' +
                               std::to_string(sample_index);
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(material.data()),
         material.size(), digest.data());
  std::array<std::uint64_t, 3> words{};
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t b = 0; b < 8; ++b) {
      words[w] = (words[w] << 8) | digest[w * 8 + b];
    }
  }
  return {static_cast<double>(words[0] >> 11) * 0x1.0p-53, words[1], words[2]};
}

std::string phrase(const CanonicalAnswer& answer, TaskKind kind,
                   std::uint64_t style) {
  const std::string& a = answer.render();
  if (kind == TaskKind::kMultipleChoice) {
    switch (style % 3) {
      case 0:
        return "Comparing the options, the answer is (" + a + ").";
      case 1:
        return "After ruling out the others, I pick option " + a + ".";
      default:
        return "Answer: " + a;
    }
  }
  switch (style % 3) {
    case 0:
      return "Working through the problem step by step.\nThe final answer is "
             "\\boxed{" + a + "}.";
    case 1:
      return "Simplifying everything, the answer is " + a + ".";
    default:
      return "We compute carefully and obtain $\\boxed{" + a + "}$";
  }
}

}  // namespace

double SyntheticModelSpec::ability_for(const std::string& query_id) const {
  auto it = per_question.find(query_id);
  return it == per_question.end() ? ability : it->second;
}

double SyntheticModelSpec::mean_ability() const {
  if (per_question.empty()) return ability;
  double sum = 0.0;
  for (const auto& [q, p] : per_question) sum += p;
  return sum / static_cast<double>(per_question.size());
}

void SyntheticModelSpec::validate() const {
  if (model_id.empty()) throw ConfigError("synthetic model needs an id");
  const auto bad = [](double p) { return !(p >= 0.0 && p <= 1.0); };
  if (bad(ability)) throw ConfigError(model_id + ": ability outside [0, 1]");
  for (const auto& [q, p] : per_question) {
    if (bad(p)) throw ConfigError(model_id + ": ability for " + q + " outside [0, 1]");
  }
  if (wrong_alphabet < 1) throw ConfigError(model_id + ": W must be >= 1");
}

nlohmann::json SyntheticModelSpec::to_json() const {
  nlohmann::json j = {{"model_id", model_id},
                      {"ability", ability},
                      {"wrong_alphabet", wrong_alphabet},
                      {"seed", seed}};
  if (!per_question.empty()) j["per_question"] = per_question;
  return j;
}

SyntheticModelSpec SyntheticModelSpec::from_json(const nlohmann::json& j) {
  SyntheticModelSpec s;
  try {
    s.model_id = j.at("model_id").get<std::string>();
    s.ability = j.value("ability", 0.5);
    if (j.contains("per_question")) {
      s.per_question = j["per_question"].get<std::map<std::string, double>>();
    }
    s.wrong_alphabet = j.value("wrong_alphabet", 4);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synthetic model spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<CanonicalAnswer> wrong_alternatives(const CanonicalAnswer& gold,
                                                int wrong_alphabet) {
  std::vector<CanonicalAnswer> out;
  out.reserve(static_cast<std::size_t>(wrong_alphabet));
  switch (gold.kind()) {
    case AnswerKind::kRational:
    case AnswerKind::kDecimal:
      for (int j = 1; j <= wrong_alphabet; ++j) {
        out.push_back(CanonicalAnswer::rational(
            gold.value() >= 0 ? Rational(-j) : gold.value() - j));
      }
      break;
    case AnswerKind::kChoice: {
      if (wrong_alphabet > 25) {
        throw ConfigError("multiple-choice questions allow at most 25 wrong letters");
      }
      for (char c = 'A'; c <= 'Z' && static_cast<int>(out.size()) < wrong_alphabet; ++c) {
        if (c != gold.render()[0]) out.push_back(CanonicalAnswer::choice(c));
      }
      break;
    }
    case AnswerKind::kExpression:
      for (int j = 1; j <= wrong_alphabet; ++j) {
        out.push_back(CanonicalAnswer::expression("w" + std::to_string(j)));
      }
      break;
  }
  return out;
}

std::string sample_synthetic(const SyntheticModelSpec& spec, const Query& query,
                             int sample_index) {
  if (!query.gold_answer) {
    throw DatasetError("synthetic sampling needs a gold answer for " + query.id);
  }
  const Draw d = keyed_draw(spec.seed, spec.model_id, query.id, sample_index);
  if (d.uniform < spec.ability_for(query.id)) {
    return phrase(*query.gold_answer, query.task_kind, d.style);
  }
  const auto wrong = wrong_alternatives(*query.gold_answer, spec.wrong_alphabet);
  return phrase(wrong[d.pick % wrong.size()], query.task_kind, d.style);
}

SyntheticEndpoint::SyntheticEndpoint(SyntheticModelSpec spec,
                                     std::span<const Query> dataset)
    : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& q : dataset) queries_.emplace(q.id, q);
}

Completion SyntheticEndpoint::complete(const CompletionRequest& request) {
  auto it = queries_.find(request.query_id);
  if (it == queries_.end()) {
    throw TransportError("synthetic endpoint has no question " + request.query_id, 404);
  }
  Completion c;
  c.text = sample_synthetic(spec_, it->second, request.sample_index);
  const auto words = [](const std::string& s) {
    return static_cast<std::int64_t>(
        std::count_if(s.begin(), s.end(), [](char ch) { return ch == ' '; }) + 1);
  };
  c.prompt_tokens = words(request.prompt);
  c.completion_tokens = words(c.text);
  return c;
}

std::vector<Query> synthetic_dataset(int n_questions, TaskKind kind) {
  std::vector<Query> out;
  out.reserve(static_cast<std::size_t>(std::max(n_questions, 0)));
  for (int i = 0; i < n_questions; ++i) {
    Query q;
    q.id = "q-" + std::to_string(i);
    q.task_kind = kind;
    if (kind == TaskKind::kMultipleChoice) {
      // Gold is the last of five options, so every wrong letter sorts first.
      q.text = "Synthetic multiple-choice question " + std::to_string(i);
      q.gold_answer = CanonicalAnswer::choice('E');
    } else {
      q.text = "Synthetic question " + std::to_string(i);
      q.gold_answer = CanonicalAnswer::rational(i + 1);
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::string_view to_string(Aggregator aggregator) {
  switch (aggregator) {
    case Aggregator::kMux:
      return "mux";
    case Aggregator::kSelfConsistency:
      return "self_consistency";
    case Aggregator::kPooled:
      return "pooled";
  }
  return "mux";
}

Aggregator aggregator_from_string(std::string_view text) {
  if (text == "mux") return Aggregator::kMux;
  if (text == "self_consistency" || text == "self-consistency" || text == "sc") {
    return Aggregator::kSelfConsistency;
  }
  if (text == "pooled" || text == "agent_forest") return Aggregator::kPooled;
  throw ConfigError("unknown aggregator: " + std::string(text));
}

nlohmann::json SyntheticResult::to_json() const {
  return {{"accuracy", accuracy}, {"std_err", std_err},
          {"ci_low", ci_low},     {"ci_high", ci_high},
          {"n_questions", n_questions}, {"correct", correct}};
}

SyntheticResult run_synthetic_experiment(std::span<const SyntheticModelSpec> specs,
                                         int n_questions, int n_samples,
                                         Aggregator aggregator) {
  if (specs.empty()) throw ConfigError("need at least one synthetic model");
  if (n_questions < 1 || n_samples < 1) {
    throw ConfigError("need at least one question and one sample");
  }
  const auto dataset = synthetic_dataset(n_questions);
  ProviderClient client(Mode::kLive);
  std::vector<ModelProfile> profiles;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    client.register_model(specs[i].model_id,
                          std::make_shared<SyntheticEndpoint>(specs[i], dataset), 1);
    profiles.push_back({specs[i].model_id, "synthetic://" + specs[i].model_id,
                        specs[i].mean_ability(), static_cast<int>(i)});
  }
  SamplingConfig sampling;
  sampling.k = n_samples;
  const SampleGrid grid = fan_out(client, dataset, profiles, sampling);

  const auto correct_on = [&](const Query& q, const std::optional<CanonicalAnswer>& a) {
    return a && answers_equal(*a, *q.gold_answer, q.task_kind);
  };
  int correct = 0;
  switch (aggregator) {
    case Aggregator::kMux:
      for (const auto& q : dataset) {
        const auto verdicts = verdicts_for(grid, q, profiles);
        try {
          correct += correct_on(q, select_output(verdicts, profiles).selected_answer);
        } catch (const NoAnswerError&) {
        }
      }
      break;
    case Aggregator::kSelfConsistency:
      for (const auto& p : profiles) {
        int model_correct = 0;
        for (const auto& q : dataset) {
          model_correct += correct_on(
              q, self_consistency(grid.at({p.model_id, q.id}), q.task_kind));
        }
        correct = std::max(correct, model_correct);
      }
      break;
    case Aggregator::kPooled:
      for (const auto& q : dataset) {
        std::vector<SampleSet> sets;
        for (const auto& p : profiles) sets.push_back(grid.at({p.model_id, q.id}));
        correct += correct_on(q, pooled_majority(sets, q.task_kind));
      }
      break;
  }

  SyntheticResult r;
  r.n_questions = n_questions;
  r.correct = correct;
  r.accuracy = static_cast<double>(correct) / n_questions;
  r.std_err = standard_error(r.accuracy, static_cast<std::size_t>(n_questions));
  r.ci_low = std::max(0.0, r.accuracy - 1.96 * r.std_err);
  r.ci_high = std::min(1.0, r.accuracy + 1.96 * r.std_err);
  return r;
}

}  // namespace slmmux
