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

#include "slmmux/harness.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "slmmux/answer_canon.hpp"
#include "slmmux/baselines.hpp"
#include "slmmux/mux.hpp"

namespace slmmux {
namespace {

constexpr double kMaxBadLineFraction = 0.01;

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> option_list(const nlohmann::json& options) {
  std::vector<std::string> out;
  if (options.is_array()) {
    for (const auto& o : options) out.push_back(o.get<std::string>());
  } else if (options.is_object()) {
    // Keys are letters; nlohmann keeps them sorted, which is letter order.
    char expected = 'A';
    for (const auto& [key, value] : options.items()) {
      if (key.size() != 1 || std::toupper(static_cast<unsigned char>(key[0])) != expected) {
        throw ParseError("option keys must be consecutive letters from A");
      }
      out.push_back(value.get<std::string>());
      ++expected;
    }
  } else {
    throw ParseError("options must be an array or an object");
  }
  if (out.size() < 2 || out.size() > 26) {
    throw ParseError("need between 2 and 26 options");
  }
  return out;
}

}  // namespace

CanonicalAnswer canonicalize_gold(const nlohmann::json& answer, TaskKind kind,
                                  const std::vector<std::string>& options) {
  if (answer.is_number()) {
    if (kind == TaskKind::kMultipleChoice) {
      throw ParseError("multiple-choice answer must be a letter or option text");
    }
    return normalize_numeric(answer.dump());
  }
  if (!answer.is_string()) throw ParseError("answer must be a string or number");
  const std::string text = trimmed(answer.get<std::string>());
  if (text.empty()) throw ParseError("answer is empty");

  if (kind == TaskKind::kMultipleChoice) {
    // "C", "c", "(C)"
    std::string bare = text;
    if (bare.size() == 3 && bare.front() == '(' && bare.back() == ')') {
      bare = bare.substr(1, 1);
    }
    if (bare.size() == 1 && std::isalpha(static_cast<unsigned char>(bare[0]))) {
      const auto letter = CanonicalAnswer::choice(bare[0]);
      if (!options.empty() &&
          static_cast<std::size_t>(letter.render()[0] - 'A') >= options.size()) {
        throw ParseError("answer " + text + " is not one of the options");
      }
      return letter;
    }
    if (auto letter = extract_final_answer(text, TaskKind::kMultipleChoice);
        letter && text.size() <= 4) {
      return *letter;
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (trimmed(options[i]) == text) {
        return CanonicalAnswer::choice(static_cast<char>('A' + i));
      }
    }
    if (auto letter = extract_final_answer(text, TaskKind::kMultipleChoice)) {
      return *letter;
    }
    throw ParseError("cannot map answer '" + text + "' to an option");
  }

  std::optional<CanonicalAnswer> gold;
  if (const auto marker = text.rfind("####"); marker != std::string::npos) {
    gold = canonicalize_span(text.substr(marker + 4));
  } else if (text.find("\\boxed") != std::string::npos ||
             text.find("\\fbox") != std::string::npos) {
    gold = extract_final_answer(text, TaskKind::kFreeMath);
  } else {
    gold = canonicalize_span(text);
  }
  if (!gold) throw ParseError("cannot canonicalize answer '" + text + "'");
  return *gold;
}

std::vector<Query> load_dataset(std::istream& in,
                                std::vector<std::string>* line_errors) {
  std::vector<Query> queries;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  std::size_t lines = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    ++lines;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ParseError("line is not a JSON object");
      if (!j.contains("question") || !j["question"].is_string()) {
        throw ParseError("missing string field 'question'");
      }
      if (!j.contains("answer") || j["answer"].is_null()) {
        throw ParseError("missing field 'answer'");
      }
      Query q;
      if (j.contains("id") && !j["id"].is_null()) {
        q.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      } else {
        q.id = "line-" + std::to_string(line_no);
      }
      if (!seen.insert(q.id).second) throw ParseError("duplicate id '" + q.id + "'");
      q.text = j["question"].get<std::string>();
      std::vector<std::string> options;
      if (j.contains("options") && !j["options"].is_null()) {
        options = option_list(j["options"]);
        q.task_kind = TaskKind::kMultipleChoice;
        for (std::size_t i = 0; i < options.size(); ++i) {
          q.text += (i == 0 ? "\n\n(" : "\n(");
          q.text += static_cast<char>('A' + i);
          q.text += ") " + options[i];
        }
      }
      q.gold_answer = canonicalize_gold(j["answer"], q.task_kind, options);
      if (j.contains("subject") && j["subject"].is_string()) {
        q.subject = j["subject"].get<std::string>();
      }
      queries.push_back(std::move(q));
    } catch (const std::exception& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_errors) *line_errors = errors;
  if (static_cast<double>(errors.size()) >
      kMaxBadLineFraction * static_cast<double>(lines)) {
    std::string message = std::to_string(errors.size()) + " of " +
                          std::to_string(lines) + " dataset lines failed";
    for (std::size_t i = 0; i < errors.size() && i < 10; ++i) {
      message += "\n  " + errors[i];
    }
    throw DatasetError(message);
  }
  return queries;
}

std::vector<Query> load_dataset(const std::filesystem::path& path,
                                std::vector<std::string>* line_errors) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  return load_dataset(in, line_errors);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("models") || !j["models"].is_array() || j["models"].empty()) {
      throw ConfigError("config needs a non-empty 'models' array");
    }
    c.k = j.value("k", c.k);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.repeats = j.value("repeats", c.repeats);
    c.lambda = j.value("lambda", c.lambda);
    c.search_temperature = j.value("search_temperature", c.search_temperature);
    c.search_repeats = j.value("search_repeats", c.search_repeats);
    c.consistency_threshold =
        j.value("consistency_threshold", c.consistency_threshold);
    c.sample_sweep = j.value("sample_sweep", c.sample_sweep);
    c.model_sweep = j.value("model_sweep", c.model_sweep);
    c.seed = j.value("seed", c.seed);
    c.cache = j.value("cache", c.cache);
    if (j.contains("prompts")) {
      c.prompts.free_math = j["prompts"].value("free_math", c.prompts.free_math);
      c.prompts.multiple_choice =
          j["prompts"].value("multiple_choice", c.prompts.multiple_choice);
    }
    if (j.contains("retry")) {
      c.retry.max_retries = j["retry"].value("max_retries", c.retry.max_retries);
      c.retry.initial_backoff = std::chrono::milliseconds(
          j["retry"].value("initial_backoff_ms",
                           static_cast<std::int64_t>(c.retry.initial_backoff.count())));
    }
    std::set<std::string> ids;
    for (const auto& m : j["models"]) {
      ModelConfig mc;
      mc.model_id = m.at("id").get<std::string>();
      if (!ids.insert(mc.model_id).second) {
        throw ConfigError("duplicate model id " + mc.model_id);
      }
      mc.provider = m.value("provider", std::string("openai"));
      mc.endpoint = m.value("endpoint", std::string());
      mc.remote_model = m.value("remote_model", std::string());
      mc.validation_accuracy = m.value("validation_accuracy", 0.0);
      mc.concurrency = m.value("concurrency", kDefaultConcurrency);
      if (m.contains("synthetic")) {
        auto spec_json = m["synthetic"];
        spec_json["model_id"] = mc.model_id;
        if (!spec_json.contains("seed")) spec_json["seed"] = c.seed;
        mc.synthetic = SyntheticModelSpec::from_json(spec_json);
        mc.provider = "synthetic";
      } else if (mc.provider == "synthetic") {
        throw ConfigError(mc.model_id + ": synthetic provider needs a 'synthetic' block");
      }
      if (!(mc.validation_accuracy >= 0.0 && mc.validation_accuracy <= 1.0)) {
        throw ConfigError(mc.model_id + ": validation_accuracy outside [0, 1]");
      }
      if (mc.concurrency < 1) throw ConfigError(mc.model_id + ": concurrency < 1");
      c.models.push_back(std::move(mc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  if (c.k < 1) throw ConfigError("k must be >= 1");
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0) ||
      !(c.search_temperature >= 0.0 && c.search_temperature <= 2.0)) {
    throw ConfigError("temperature must lie in [0, 2]");
  }
  if (c.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (c.repeats < 1 || c.search_repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(c.consistency_threshold > 0.0 && c.consistency_threshold <= 1.0)) {
    throw ConfigError("consistency_threshold must lie in (0, 1]");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json models_json = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json mj = {{"id", m.model_id},
                         {"provider", m.provider},
                         {"endpoint", m.endpoint},
                         {"remote_model", m.remote_model},
                         {"validation_accuracy", m.validation_accuracy}};
    if (m.synthetic) {
      auto s = m.synthetic->to_json();
      s.erase("model_id");
      mj["synthetic"] = std::move(s);
    }
    models_json.push_back(std::move(mj));
  }
  return {{"models", std::move(models_json)},
          {"k", k},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"repeats", repeats},
          {"lambda", lambda},
          {"search_temperature", search_temperature},
          {"search_repeats", search_repeats},
          {"consistency_threshold", consistency_threshold},
          {"sample_sweep", sample_sweep},
          {"model_sweep", model_sweep},
          {"seed", seed},
          {"prompts", prompts.to_json()}};
}

std::string ExperimentConfig::fingerprint() const {
  return slmmux::fingerprint(to_json());
}

std::vector<ModelProfile> ExperimentConfig::profiles() const {
  std::vector<ModelProfile> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    out.push_back({models[i].model_id,
                   models[i].synthetic ? "synthetic://" + models[i].model_id
                                       : models[i].endpoint,
                   models[i].validation_accuracy, static_cast<int>(i)});
  }
  return out;
}

SamplingConfig ExperimentConfig::sampling() const {
  SamplingConfig s;
  s.k = k;
  s.temperature = temperature;
  s.max_tokens = max_tokens;
  s.prompts = prompts;
  return s;
}

SamplingConfig ExperimentConfig::search_sampling() const {
  SamplingConfig s = sampling();
  s.temperature = search_temperature;
  return s;
}

ProviderClient make_client(const ExperimentConfig& config, Mode mode,
                           std::span<const Query> dataset,
                           const std::optional<std::filesystem::path>& cache_override) {
  std::shared_ptr<ResponseCache> cache;
  if (mode != Mode::kLive) {
    cache = std::make_shared<ResponseCache>(cache_override.value_or(config.cache));
  }
  ProviderClient client(mode, cache);
  for (const auto& m : config.models) {
    if (m.synthetic) {
      client.register_model(m.model_id,
                            std::make_shared<SyntheticEndpoint>(*m.synthetic, dataset),
                            m.concurrency);
    } else if (mode == Mode::kReplay) {
      client.set_concurrency_limit(m.model_id, m.concurrency);
    } else {
      auto endpoint = endpoint_from_env(m.provider, m.endpoint, m.remote_model);
      client.register_model(
          m.model_id, std::make_shared<OpenAiChatEndpoint>(std::move(endpoint), config.retry),
          m.concurrency);
    }
  }
  return client;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kMux:
      return "mux";
    case Method::kSelfConsistency:
      return "self_consistency";
    case Method::kPooled:
      return "pooled";
    case Method::kSingle:
      return "single";
  }
  return "mux";
}

Method method_from_string(std::string_view text) {
  if (text == "mux") return Method::kMux;
  if (text == "self_consistency" || text == "self-consistency") {
    return Method::kSelfConsistency;
  }
  if (text == "pooled" || text == "agent_forest") return Method::kPooled;
  if (text == "single") return Method::kSingle;
  throw ConfigError("unknown method: " + std::string(text));
}

nlohmann::json QuestionDecision::to_json() const {
  const auto opt = [](const std::optional<CanonicalAnswer>& a) {
    return a ? a->to_json() : nlohmann::json(nullptr);
  };
  nlohmann::json j = {{"query_id", query_id},
                      {"repeat", repeat},
                      {"answer", opt(answer)},
                      {"gold", opt(gold)},
                      {"selected_model", selected_model
                                             ? nlohmann::json(*selected_model)
                                             : nlohmann::json(nullptr)},
                      {"correct", correct}};
  if (mux) j["mux"] = mux->to_json();
  return j;
}

QuestionDecision QuestionDecision::from_json(const nlohmann::json& j) {
  QuestionDecision d;
  d.query_id = j.at("query_id").get<std::string>();
  d.repeat = j.value("repeat", 0);
  if (!j.at("answer").is_null()) d.answer = CanonicalAnswer::from_json(j["answer"]);
  if (j.contains("gold") && !j["gold"].is_null()) {
    d.gold = CanonicalAnswer::from_json(j["gold"]);
  }
  if (j.contains("selected_model") && !j["selected_model"].is_null()) {
    d.selected_model = j["selected_model"].get<std::string>();
  }
  d.correct = j.at("correct").get<bool>();
  return d;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json decisions_json = nlohmann::json::array();
  for (const auto& d : decisions) decisions_json.push_back(d.to_json());
  return {{"fingerprint", fingerprint},
          {"method", std::string(to_string(method))},
          {"models", models},
          {"k", k},
          {"temperature", temperature},
          {"repeats", repeats},
          {"n_questions", n_questions},
          {"accuracy", accuracy},
          {"std_err", std_err},
          {"attribution", attribution},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens},
          {"decisions", std::move(decisions_json)}};
}

void RunReport::write_decisions(std::ostream& out) const {
  for (const auto& d : decisions) out << d.to_json().dump() << '\n';
}

RunReport evaluate(Method method, const ProviderClient& client,
                   std::span<const ModelProfile> models,
                   std::span<const Query> dataset,
                   const SamplingConfig& sampling, int repeats,
                   const std::string& fingerprint) {
  if (models.empty()) throw ConfigError("evaluate needs at least one model");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if ((method == Method::kSelfConsistency || method == Method::kSingle) &&
      models.size() != 1) {
    throw ConfigError(std::string(to_string(method)) +
                      " evaluates exactly one model; got " +
                      std::to_string(models.size()));
  }
  for (const auto& q : dataset) {
    if (!q.gold_answer) throw DatasetError("query " + q.id + " has no gold answer");
  }

  RunReport report;
  report.fingerprint = fingerprint;
  report.method = method;
  for (const auto& m : models) report.models.push_back(m.model_id);
  report.k = method == Method::kSingle ? 1 : sampling.k;
  report.temperature = sampling.temperature;
  report.repeats = repeats;
  report.n_questions = dataset.size();

  std::size_t correct = 0;
  for (int r = 0; r < repeats; ++r) {
    SamplingConfig round = sampling;
    round.sample_offset = sampling.sample_offset + r * sampling.k;
    if (method == Method::kSingle) round.k = 1;
    const SampleGrid grid = fan_out(client, dataset, models, round);
    for (const auto& [key, set] : grid) {
      report.prompt_tokens += set.prompt_tokens;
      report.completion_tokens += set.completion_tokens;
    }

    for (const auto& q : dataset) {
      QuestionDecision d;
      d.query_id = q.id;
      d.repeat = r;
      d.gold = q.gold_answer;
      switch (method) {
        case Method::kMux: {
          const auto verdicts = verdicts_for(grid, q, models);
          try {
            MuxDecision m = select_output(verdicts, models);
            d.answer = m.selected_answer;
            d.selected_model = m.selected_model;
            d.mux = std::move(m);
          } catch (const NoAnswerError&) {
          }
          break;
        }
        case Method::kSelfConsistency:
        case Method::kSingle:
          d.answer = self_consistency(grid.at({models[0].model_id, q.id}), q.task_kind);
          if (d.answer) d.selected_model = models[0].model_id;
          break;
        case Method::kPooled: {
          std::vector<SampleSet> sets;
          for (const auto& m : models) sets.push_back(grid.at({m.model_id, q.id}));
          d.answer = pooled_majority(sets, q.task_kind);
          break;
        }
      }
      d.correct = d.answer && answers_equal(*d.answer, *q.gold_answer, q.task_kind);
      correct += d.correct;
      report.decisions.push_back(std::move(d));
    }
  }

  const std::size_t graded = dataset.size() * static_cast<std::size_t>(repeats);
  report.accuracy = graded == 0 ? 0.0
                                : static_cast<double>(correct) /
                                      static_cast<double>(graded);
  report.std_err = standard_error(report.accuracy, dataset.size());
  if (method == Method::kMux) {
    report.attribution = report_attribution(report.decisions, report.models);
  }
  return report;
}

std::map<std::string, double> report_attribution(
    std::span<const QuestionDecision> decisions,
    std::span<const std::string> models) {
  std::map<std::string, double> shares;
  for (const auto& m : models) shares[m] = 0.0;
  std::size_t answered = 0;
  for (const auto& d : decisions) {
    if (!d.selected_model) continue;
    ++answered;
    shares[*d.selected_model] += 1.0;
  }
  if (answered > 0) {
    for (auto& [m, s] : shares) s /= static_cast<double>(answered);
  }
  return shares;
}

std::map<std::string, double> report_attribution(
    std::span<const MuxDecision> decisions, std::span<const std::string> models) {
  std::vector<QuestionDecision> as_questions;
  as_questions.reserve(decisions.size());
  for (const auto& d : decisions) {
    QuestionDecision q;
    q.selected_model = d.selected_model;
    as_questions.push_back(std::move(q));
  }
  return report_attribution(as_questions, models);
}

nlohmann::json DecisionLogSummary::to_json() const {
  return {{"decisions", decisions},
          {"correct", correct},
          {"accuracy", accuracy},
          {"attribution", attribution}};
}

DecisionLogSummary summarize_decision_log(std::istream& in) {
  std::vector<QuestionDecision> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    try {
      log.push_back(QuestionDecision::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("decision log line " + std::to_string(line_no) + ": " +
                         e.what());
    }
  }
  DecisionLogSummary s;
  s.decisions = log.size();
  for (const auto& d : log) {
    // Regrade from the logged answer and gold instead of trusting the flag.
    s.correct += d.answer && d.gold && *d.answer == *d.gold;
  }
  s.accuracy = log.empty() ? 0.0
                           : static_cast<double>(s.correct) /
                                 static_cast<double>(log.size());
  s.attribution = report_attribution(log);
  return s;
}

}  // namespace slmmux
