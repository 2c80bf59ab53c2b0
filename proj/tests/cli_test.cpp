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


// Drives the slmmux binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace slmmux {
namespace {

using testing::fixture;
using testing::TempDir;

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(SLMMUX_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fx(const std::string& name) { return fixture("replay/" + name).string(); }

TEST(CliTest, AnalyzePoint) {
  const auto r = cli("analyze --n 3 --p 0.6");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "n,p,accuracy,type\n3,0.6,0.648,Type2\n");
}

TEST(CliTest, AnalyzeCurve) {
  const auto r = cli("analyze curve --n 3 --grid 0:1:0.01");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 102);
  EXPECT_NE(r.out.find("3,0.5,0.5,Type3\n"), std::string::npos);
  EXPECT_EQ(cli("analyze curve --grid nonsense").code, 1);
  EXPECT_EQ(cli("analyze --n 3 --p 1.5").code, 1);
}

TEST(CliTest, ReplayRunIsDeterministicAndMatchesHandGrade) {
  TempDir dir;
  const std::string base = "--config " + fx("config.json") + " --mode replay run --dataset " +
                           fx("dataset.jsonl");
  ASSERT_EQ(cli(base + " --out " + (dir / "a.json").string() + " --decisions " +
                (dir / "a.jsonl").string()).code, 0);
  ASSERT_EQ(cli(base + " --out " + (dir / "b.json").string()).code, 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));

  const auto report = nlohmann::json::parse(slurp(dir / "a.json"));
  const auto expected = nlohmann::json::parse(slurp(fx("expected.json")));
  EXPECT_EQ(report["accuracy"], expected["accuracy"]);

  const auto summary = cli("report --decisions " + (dir / "a.jsonl").string());
  EXPECT_EQ(summary.code, 0);
  EXPECT_EQ(nlohmann::json::parse(summary.out)["accuracy"], expected["accuracy"]);
}

TEST(CliTest, ExitCodes) {
  TempDir dir;
  // config error
  EXPECT_EQ(cli("--config /nonexistent.json run --dataset " + fx("dataset.jsonl")).code, 1);
  // dataset error
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"question\": \"no answer\"}\n";
  }
  EXPECT_EQ(cli("--config " + fx("config.json") + " run --dataset " +
                (dir / "bad.jsonl").string()).code, 3);
  // cache miss: replay against an empty cache
  EXPECT_EQ(cli("--config " + fx("config.json") + " --cache " + (dir / "empty.jsonl").string() +
                " run --dataset " + fx("dataset.jsonl")).code, 2);
  // unknown flag
  EXPECT_EQ(cli("run --bogus").code, 1);
}

TEST(CliTest, RecordSearchAndScale) {
  TempDir dir;
  const std::string cfg = "--config " + fx("config.json") + " --cache " +
                          (dir / "cache.jsonl").string() + " --mode record ";
  const auto matrix = (dir / "matrix.jsonl").string();
  const auto s = cli(cfg + "search --k 2..3 --dataset " + fx("dataset.jsonl") +
                     " --matrix " + matrix);
  ASSERT_EQ(s.code, 0);
  const auto result = nlohmann::json::parse(s.out);
  EXPECT_EQ(result["results"]["2"].size(), 3u);
  EXPECT_EQ(result["results"]["3"].size(), 1u);
  // Re-running from the saved matrix gives the same ranking.
  const auto again = cli("search --k 2..3 --lambda 1.0 --matrix " + matrix);
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(nlohmann::json::parse(again.out)["results"], result["results"]);

  const auto samples = cli(cfg + "scale samples --values 1..3 --dataset " + fx("dataset.jsonl"));
  ASSERT_EQ(samples.code, 0);
  EXPECT_EQ(samples.out.substr(0, samples.out.find('\n')),
            "axis,value,accuracy,std_err,subset,samples_per_model,series");
  EXPECT_EQ(std::count(samples.out.begin(), samples.out.end(), '\n'), 4);

  const auto models = cli(cfg + "scale models --values 1..2 --dataset " + fx("dataset.jsonl"));
  ASSERT_EQ(models.code, 0);
  EXPECT_EQ(std::count(models.out.begin(), models.out.end(), '\n'), 5);
  EXPECT_NE(models.out.find(",union\n"), std::string::npos);

  // --out also writes a sidecar carrying the config fingerprint.
  const auto csv = (dir / "sweep.csv").string();
  ASSERT_EQ(cli(cfg + "scale samples --values 2..3 --dataset " + fx("dataset.jsonl") +
                " --out " + csv).code, 0);
  const auto sidecar = nlohmann::json::parse(slurp(csv + ".json"));
  EXPECT_EQ(sidecar["axis"], "samples");
  EXPECT_EQ(sidecar["values"], nlohmann::json({2, 3}));
  EXPECT_EQ(sidecar["fingerprint"].get<std::string>().size(), 64u);
  EXPECT_EQ(sidecar["config"]["k"], 3);
}

TEST(CliTest, Simulate) {
  TempDir dir;
  {
    std::ofstream spec(dir / "spec.json");
    spec << R"({"models": [{"model_id": "a", "ability": 0.9}, {"model_id": "b", "ability": 0.3}]})";
  }
  const auto r = cli("--seed 3 simulate --spec " + (dir / "spec.json").string() +
                     " --aggregator mux --samples 3 --trials 2000");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["n_questions"], 2000);
  EXPECT_NEAR(j["predicted_mux"].get<double>(), 0.972, 1e-12);
  EXPECT_EQ(cli("--seed 3 simulate --spec " + (dir / "spec.json").string() +
                " --aggregator mux --samples 3 --trials 2000").out,
            r.out);
}

}  // namespace
}  // namespace slmmux
