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

// slmmux: run, search, scale, simulate, analyze, report.
//
// Exit codes: 0 ok, 1 config/auth error, 2 transport failure or cache miss,
// 3 dataset error. Anything else unexpected also exits 1.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "slmmux/analysis.hpp"
#include "slmmux/baselines.hpp"
#include "slmmux/harness.hpp"
#include "slmmux/search.hpp"
#include "slmmux/simulator.hpp"

namespace {

using namespace slmmux;

struct Globals {
  std::string config_path;
  std::string mode = "replay";
  std::optional<std::uint64_t> seed;
  std::string cache;
};

ExperimentConfig load_config(const Globals& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required");
  std::ifstream in(g.config_path);
  if (!in) throw ConfigError("cannot open config " + g.config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(g.config_path + ": " + e.what());
  }
  // --seed replaces the config seed before synthetic specs inherit it.
  if (g.seed) j["seed"] = *g.seed;
  auto config = ExperimentConfig::from_json(j);
  // Relative cache paths resolve against the config file's directory.
  if (g.cache.empty()) {
    std::filesystem::path cache(config.cache);
    if (cache.is_relative()) {
      config.cache =
          (std::filesystem::path(g.config_path).parent_path() / cache).string();
    }
  } else {
    config.cache = g.cache;
  }
  return config;
}

// Writes to `path`, or stdout for "" / "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<int> parse_range(const std::string& text) {
  // "2..5" or "2,3,5" or "4".
  std::vector<int> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty range " + text);
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoi(part));
  if (out.empty()) throw ConfigError("empty range " + text);
  return out;
}

std::vector<ModelProfile> pick_models(const ExperimentConfig& config,
                                      const std::vector<std::string>& ids) {
  auto all = config.profiles();
  if (ids.empty()) return all;
  std::vector<ModelProfile> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const ModelProfile& p) { return p.model_id == id; });
    if (it == all.end()) throw ConfigError("model not in config: " + id);
    out.push_back(*it);
  }
  return out;
}

// Tolerated bad lines are skipped, but say so.
std::vector<Query> read_dataset(const std::string& path) {
  std::vector<std::string> skipped;
  auto dataset = load_dataset(std::filesystem::path(path), &skipped);
  for (const auto& e : skipped) std::cerr << "warning: " << path << ": skipped " << e << '\n';
  return dataset;
}

std::string csv_double(double v) {
  // Shortest text that round-trips.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// <csv>.json next to a sweep CSV so the numbers can be traced to a config.
void emit_sweep(const std::string& out, const std::string& csv,
                const ExperimentConfig& config, std::string_view axis,
                const std::vector<int>& values, const std::string& dataset) {
  emit(out, csv);
  if (out.empty()) return;
  const nlohmann::json sidecar = {{"axis", axis},
                                  {"values", values},
                                  {"dataset", dataset},
                                  {"fingerprint", config.fingerprint()},
                                  {"config", config.to_json()}};
  emit(out + ".json", sidecar.dump(2) + "\n");
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return 3;
  } catch (const CacheMissError& e) {
    std::cerr << "cache miss: " << e.what() << '\n';
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 2;
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-based selection over small language model ensembles"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--mode", g.mode, "live | record | replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for all client-side randomness");
  app.add_option("--cache", g.cache, "Override the config's cache file");

  std::function<void()> action;

  // run
  auto* run = app.add_subcommand("run", "Evaluate a method on a dataset");
  std::string run_dataset, run_method = "mux", run_out, run_decisions;
  std::vector<std::string> run_models;
  run->add_option("--dataset", run_dataset, "JSONL dataset")->required();
  run->add_option("--method", run_method, "mux | self_consistency | pooled | single");
  run->add_option("--models", run_models, "Subset of configured model ids");
  run->add_option("--out", run_out, "RunReport JSON (default stdout)");
  run->add_option("--decisions", run_decisions, "Decision log (JSON lines)");
  run->callback([&] {
    action = [&] {
      const auto config = load_config(g);
      const auto dataset = read_dataset(run_dataset);
      const auto client = make_client(config, mode_from_string(g.mode), dataset);
      const auto models = pick_models(config, run_models);
      const auto report = evaluate(method_from_string(run_method), client, models,
                                   dataset, config.sampling(), config.repeats,
                                   config.fingerprint());
      emit(run_out, report.to_json().dump(2) + "\n");
      if (!run_decisions.empty()) {
        std::ostringstream os;
        report.write_decisions(os);
        emit(run_decisions, os.str());
      }
    };
  });

  // search
  auto* search = app.add_subcommand("search", "Exhaustive model subset search");
  std::string search_k = "2..5", search_matrix, search_dataset, search_out;
  double search_lambda = -1.0;
  int search_top = 0;
  bool search_consistent = false;
  search->add_option("--k", search_k, "Subset sizes, e.g. 2..5");
  search->add_option("--lambda", search_lambda, "Contradiction weight");
  search->add_option("--matrix", search_matrix,
                     "Correctness matrix (JSONL); written when --dataset is given");
  search->add_option("--dataset", search_dataset, "Validation set to grade first");
  search->add_option("--top", search_top, "Keep the top N subsets per K (0 = all)");
  search->add_flag("--consistent-witness", search_consistent,
                   "Count contradictions against consistently correct members");
  search->add_option("--out", search_out, "Result JSON (default stdout)");
  search->callback([&] {
    action = [&] {
      if (search_matrix.empty() && search_dataset.empty()) {
        throw ConfigError("search needs --matrix or --dataset");
      }
      std::optional<ExperimentConfig> config;
      if (!g.config_path.empty()) config = load_config(g);
      double lambda = search_lambda;
      if (lambda < 0) lambda = config ? config->lambda : 1.0;
      std::optional<CorrectnessMatrix> matrix;
      if (!search_dataset.empty()) {
        if (!config) throw ConfigError("--dataset needs --config");
        const auto dataset = read_dataset(search_dataset);
        const auto client = make_client(*config, mode_from_string(g.mode), dataset);
        const auto profiles = config->profiles();
        matrix = build_matrix(client, dataset, profiles, config->search_sampling(),
                              config->search_repeats,
                              {config->consistency_threshold});
        if (!search_matrix.empty()) {
          std::ofstream out(search_matrix);
          if (!out) throw Error("cannot write " + search_matrix);
          matrix->write_jsonl(out);
        }
      } else {
        std::ifstream in(search_matrix);
        if (!in) throw DatasetError("cannot open matrix " + search_matrix);
        matrix = CorrectnessMatrix::read_jsonl(in);
      }
      nlohmann::json result = {{"lambda", lambda},
                               {"n_models", matrix->n_models()},
                               {"n_queries", matrix->n_queries()},
                               {"results", nlohmann::json::object()}};
      for (int k : parse_range(search_k)) {
        if (k < 1 || static_cast<std::size_t>(k) > matrix->n_models()) {
          throw ConfigError("K=" + std::to_string(k) + " outside 1.." +
                            std::to_string(matrix->n_models()));
        }
        auto ranked = exhaustive_search(
            *matrix, k, lambda,
            search_consistent ? CorrectWitness::kConsistent : CorrectWitness::kModal);
        if (search_top > 0 && ranked.size() > static_cast<std::size_t>(search_top)) {
          ranked.resize(static_cast<std::size_t>(search_top));
        }
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& s : ranked) rows.push_back(s.to_json());
        result["results"][std::to_string(k)] = std::move(rows);
      }
      emit(search_out, result.dump(2) + "\n");
    };
  });

  // scale samples|models
  auto* scale = app.add_subcommand("scale", "Compute scaling sweeps");
  scale->require_subcommand(1);
  std::string scale_dataset, scale_validation, scale_out, scale_values;
  std::vector<std::string> scale_models;
  auto* scale_samples = scale->add_subcommand("samples", "Accuracy vs samples per model");
  auto* scale_pool = scale->add_subcommand("models", "Accuracy vs subset size");
  for (auto* sub : {scale_samples, scale_pool}) {
    sub->add_option("--dataset", scale_dataset, "Evaluation JSONL")->required();
    sub->add_option("--out", scale_out, "CSV (default stdout)");
    sub->add_option("--values", scale_values, "Override the sweep, e.g. 2..9");
  }
  scale_samples->add_option("--models", scale_models, "Subset of configured model ids");
  scale_pool->add_option("--validation", scale_validation,
                         "Validation JSONL for the search (default: --dataset)");
  scale_samples->callback([&] {
    action = [&] {
      const auto config = load_config(g);
      const auto dataset = read_dataset(scale_dataset);
      const auto client = make_client(config, mode_from_string(g.mode), dataset);
      const auto models = pick_models(config, scale_models);
      const auto values =
          scale_values.empty() ? config.sample_sweep : parse_range(scale_values);
      const auto points = sweep_samples(client, models, values, dataset,
                                        config.sampling(), config.repeats);
      std::ostringstream os;
      write_sweep_csv(os, points);
      emit_sweep(scale_out, os.str(), config, "samples", values, scale_dataset);
    };
  });
  scale_pool->callback([&] {
    action = [&] {
      const auto config = load_config(g);
      const auto evaluation = read_dataset(scale_dataset);
      const auto validation =
          scale_validation.empty()
              ? evaluation
              : read_dataset(scale_validation);
      std::vector<Query> both = evaluation;
      for (const auto& q : validation) {
        if (std::none_of(both.begin(), both.end(),
                         [&](const Query& e) { return e.id == q.id; })) {
          both.push_back(q);
        }
      }
      const auto client = make_client(config, mode_from_string(g.mode), both);
      ModelSweepConfig sweep;
      sweep.K_values =
          scale_values.empty() ? config.model_sweep : parse_range(scale_values);
      sweep.lambda = config.lambda;
      sweep.search_sampling = config.search_sampling();
      sweep.search_repeats = config.search_repeats;
      sweep.matrix_options.consistency_threshold = config.consistency_threshold;
      sweep.eval_sampling = config.sampling();
      const auto pool = config.profiles();
      const auto points = sweep_models(client, pool, validation, evaluation, sweep);
      std::ostringstream os;
      write_sweep_csv(os, points);
      emit_sweep(scale_out, os.str(), config, "models", sweep.K_values, scale_dataset);
    };
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo over synthetic models");
  std::string sim_spec, sim_aggregator = "mux", sim_out;
  int sim_samples = 3, sim_trials = 10000;
  simulate->add_option("--spec", sim_spec, "Synthetic model specs (JSON)")->required();
  simulate->add_option("--aggregator", sim_aggregator, "mux | self_consistency | pooled");
  simulate->add_option("--samples", sim_samples, "Samples per model")->check(CLI::PositiveNumber);
  simulate->add_option("--trials", sim_trials, "Synthetic questions")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "Result JSON (default stdout)");
  simulate->callback([&] {
    action = [&] {
      std::ifstream in(sim_spec);
      if (!in) throw ConfigError("cannot open spec " + sim_spec);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(sim_spec + ": " + e.what());
      }
      const auto& list = j.is_array() ? j : j.at("models");
      std::vector<SyntheticModelSpec> specs;
      for (auto s : list) {
        if (g.seed && !s.contains("seed")) s["seed"] = *g.seed;
        specs.push_back(SyntheticModelSpec::from_json(s));
      }
      const auto result = run_synthetic_experiment(
          specs, sim_trials, sim_samples, aggregator_from_string(sim_aggregator));
      auto out = result.to_json();
      out["aggregator"] = sim_aggregator;
      out["samples"] = sim_samples;
      std::vector<double> abilities;
      for (const auto& s : specs) abilities.push_back(s.mean_ability());
      AbilityVector<double> av(Eigen::Map<const Eigen::VectorXd>(
          abilities.data(), static_cast<Eigen::Index>(abilities.size())));
      out["predicted_mux"] = predict_mux(sim_samples, av);
      out["predicted_agent_forest"] = predict_agent_forest(sim_samples, av);
      emit(sim_out, out.dump(2) + "\n");
    };
  });

  // analyze [curve]
  auto* analyze = app.add_subcommand("analyze", "Closed-form majority-vote accuracy");
  int an_n = 3;
  double an_p = -1.0;
  analyze->add_option("--n", an_n, "Samples N")->check(CLI::PositiveNumber);
  analyze->add_option("--p", an_p, "Per-sample accuracy p");
  auto* curve = analyze->add_subcommand("curve", "A(N, p) over a p grid as CSV");
  std::string grid = "0:1:0.01";
  curve->add_option("--n", an_n, "Samples N")->check(CLI::PositiveNumber);
  curve->add_option("--grid", grid, "lo:hi:step");
  analyze->callback([&] {
    action = [&] {
      if (curve->parsed()) {
        double lo, hi, step;
        char c1 = 0, c2 = 0;
        std::istringstream is(grid);
        if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
          throw ConfigError("--grid must be lo:hi:step");
        }
        std::ostringstream os;
        os << "n,p,accuracy,type\n";
        for (const auto& [p, a] : majority_curve(an_n, lo, hi, step)) {
          os << an_n << ',' << csv_double(p) << ',' << csv_double(a) << ','
             << to_string(classify_question_type(p)) << '\n';
        }
        std::cout << os.str();
        return;
      }
      if (an_p < 0) throw ConfigError("analyze needs --p (or the curve subcommand)");
      const double a = majority_success_prob(an_n, an_p);
      std::cout << "n,p,accuracy,type\n"
                << an_n << ',' << csv_double(an_p) << ',' << csv_double(a) << ','
                << to_string(classify_question_type(an_p)) << '\n';
    };
  });

  // report
  auto* report = app.add_subcommand("report", "Summarize a decision log");
  std::string report_decisions;
  report->add_option("--decisions", report_decisions, "Decision log (JSON lines)")->required();
  report->callback([&] {
    action = [&] {
      std::ifstream in(report_decisions);
      if (!in) throw DatasetError("cannot open " + report_decisions);
      std::cout << summarize_decision_log(in).to_json().dump(2) << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_value;
  if (!action) return 1;
  return run_guarded(action);
}
