/*
 * Copyright 2026 The ltrcdr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ltrc/cli.hpp"

namespace ltrc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ltrc_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

json echoed_config(const std::string& out) {
  const auto first = out.substr(0, out.find('\n'));
  EXPECT_EQ(first.rfind("# config ", 0), 0u);
  return json::parse(first.substr(9))["resolved"];
}

TEST(Cli, SimulateWritesTheGeneratedSample) {
  const auto dir = scratch("sim");
  const auto csv = (dir / "s.csv").string();
  const CliRun r = run({"simulate", "--n", "120", "--seed", "9", "--out", csv});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset loaded = load_observed_csv(csv, 2);
  const Dataset direct = generate(ScenarioSpec::ate(), 120, 9, false).observed;
  ASSERT_EQ(loaded.size(), direct.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded.records[i].q, direct.records[i].q);
    EXPECT_EQ(loaded.records[i].x, direct.records[i].x);
    EXPECT_EQ(loaded.records[i].delta, direct.records[i].delta);
    EXPECT_EQ(loaded.records[i].a, direct.records[i].a);
    EXPECT_EQ(loaded.records[i].z, direct.records[i].z);
  }
  const json meta = read_json(csv + ".json");
  EXPECT_EQ(meta["config"]["seed"], 9);
  EXPECT_GE(meta["attempted"].get<std::size_t>(), 120u);
}

TEST(Cli, EstimateAteMatchesTheLibrary) {
  const auto dir = scratch("ate");
  const auto csv = (dir / "s.csv").string();
  const auto out = (dir / "ate.json").string();
  ASSERT_EQ(run({"simulate", "--n", "400", "--seed", "3", "--out", csv}).code, 0);
  const CliRun r = run({"estimate-ate", "--data", csv, "--seed", "11", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(out);

  const Dataset d = load_observed_csv(csv, 2);
  const AteResult lib =
      solve_ate(d, fit_scheme_a(d, SchemeConfig{}, 11), Transform::survival_indicator(3.0));
  EXPECT_EQ(j["theta_hat"].get<double>(), lib.theta_hat);
  EXPECT_EQ(j["se_model"].get<double>(), lib.se_model);
  EXPECT_EQ(j["config"]["seed"], 11);
  EXPECT_EQ(j["config"]["data"], csv);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"simulate", "--n", "ten"}).code, 1);
  EXPECT_EQ(run({"simulate", "--n", "10"}).code, 1);  // no --out
  EXPECT_EQ(run({"estimate-ate"}).code, 1);           // no --data
  EXPECT_EQ(run({"simulate", "--scenario", "iv", "--out", "x.csv"}).code, 1);

  // A dataset that parses but violates the observation constraints.
  const auto dir = scratch("codes");
  const auto csv = (dir / "bad.csv").string();
  std::ofstream(csv) << "q,x,delta,a,z1\n2.0,1.0,1,0,0.5\n0.1,0.5,0,1,0.2\n";
  const CliRun r = run({"validate", "--data", csv});
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.err.find("violation"), std::string::npos);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = LTRC_BENCH_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("simulate --bogus"), 1);
  EXPECT_EQ(status("estimate-ate --data /nonexistent.csv"), 1);
}

TEST(Cli, ConfigFileRejectsUnknownKeysAndWrongTypes) {
  const auto dir = scratch("cfg");
  const auto cfg = (dir / "c.json").string();
  std::ofstream(cfg) << R"({"n": 50, "sede": 3})";
  CliRun r = run({"simulate", "--config", cfg, "--out", (dir / "s.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("sede"), std::string::npos);

  std::ofstream(cfg) << R"({"n": "fifty"})";
  r = run({"simulate", "--config", cfg, "--out", (dir / "s.csv").string()});
  EXPECT_EQ(r.code, 1);

  std::ofstream(cfg) << R"({"learner": {"kind": "ridge_linear", "depth": 3}})";
  r = run({"validate", "--config", cfg, "--target", "estimate-cate"});
  EXPECT_EQ(r.code, 1);

  std::ofstream(cfg) << R"({"loss": "ltrcDR", "learner": {"kind": "ridge_linear", "ridge": 0.1}})";
  r = run({"validate", "--config", cfg, "--target", "estimate-cate"});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run({"validate", "--config", cfg, "--target", "estimate-ate"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, FlagsOverrideFileOverrideDefaults) {
  const auto dir = scratch("prec");
  const auto cfg = (dir / "c.json").string();
  std::ofstream(cfg) << R"({"n": 50, "seed": 4})";
  const CliRun r = run({"simulate", "--config", cfg, "--n", "40", "--out", (dir / "s.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json resolved = echoed_config(r.out);
  EXPECT_EQ(resolved["n"], 40);
  EXPECT_EQ(resolved["seed"], 4);
  EXPECT_EQ(resolved["scenario"], "ate");
  EXPECT_EQ(load_observed_csv((dir / "s.csv").string(), 2).size(), 40u);
}

TEST(Cli, SeedEnvironmentVariableSetsTheDefault) {
  ::setenv("LTRC_SEED", "77", 1);
  const auto dir = scratch("env");
  CliRun r = run({"simulate", "--n", "20", "--out", (dir / "s.csv").string()});
  EXPECT_EQ(echoed_config(r.out)["seed"], 77);
  r = run({"simulate", "--n", "20", "--seed", "5", "--out", (dir / "s.csv").string()});
  EXPECT_EQ(echoed_config(r.out)["seed"], 5);
  ::setenv("LTRC_SEED", "x7", 1);
  EXPECT_EQ(run({"simulate", "--n", "20", "--out", (dir / "s.csv").string()}).code, 1);
  ::unsetenv("LTRC_SEED");
}

TEST(Cli, BenchAteReportArtifacts) {
  const auto dir = scratch("bench");
  const CliRun r = run({"bench-ate", "--table1-row", "1", "--table1-row", "10", "--table1-row", "15",
                     "--n", "200", "--reps", "6", "--seed", "2", "--truth-mc", "20000", "--out",
                     dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string stem = (dir / "ate_table1_200_6_2").string();
  ASSERT_TRUE(fs::exists(stem + ".csv"));
  ASSERT_TRUE(fs::exists(stem + ".json"));
  ASSERT_TRUE(fs::exists(stem + ".md"));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 3);

  // Coverage is printed to three decimals, bias and SD to four.
  std::ifstream md(stem + ".md");
  std::string line;
  const std::regex row(R"(^\| [a-z_]* \| [^|]* \| -?\d+\.\d{4} \| \d+\.\d{4} \| \d+\.\d{4} \| \d\.\d{3} \|$)");
  int rows = 0;
  while (std::getline(md, line)) rows += std::regex_match(line, row);
  EXPECT_EQ(rows, 3);

  // The JSON summary is a pure function of the replication CSV and the truth.
  const json summary = read_json(stem + ".json");
  std::ifstream csv(stem + ".csv");
  BenchmarkResult back = read_replications_csv(csv, BenchmarkResult::Kind::kAte);
  back.truth = summary["truth"].get<double>();
  ASSERT_EQ(back.cells.size(), 3u);
  for (std::size_t c = 0; c < back.cells.size(); ++c) {
    const CellSummary s = back.summary(back.cells[c]);
    const json& j = summary["cells"][c];
    EXPECT_EQ(j["method"], back.cells[c].method);
    EXPECT_EQ(j["ok"].get<std::size_t>() + j["failed"].get<std::size_t>(), 6u);
    EXPECT_DOUBLE_EQ(j["bias"].get<double>(), s.bias);
    EXPECT_DOUBLE_EQ(j["sd"].get<double>(), s.sd);
    EXPECT_DOUBLE_EQ(j["mean_se"].get<double>(), s.mean_se);
    EXPECT_DOUBLE_EQ(j["cp"].get<double>(), s.cp);
  }
  EXPECT_EQ(summary["config"]["cli"]["reps"], 6);
}

TEST(Cli, BenchAteIsIndependentOfJobs) {
  auto csv_for = [](const std::string& jobs) {
    const auto dir = scratch("jobs" + jobs);
    const CliRun r = run({"--jobs", jobs, "bench-ate", "--table1-row", "9", "--n", "200", "--reps",
                       "3", "--truth", "0", "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "ate_table1-row9_200_3_1.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string one = csv_for("1");
  EXPECT_FALSE(one.empty());
  EXPECT_EQ(one, csv_for("3"));
}

TEST(Cli, EstimateCateWritesModelAndGrid) {
  const auto dir = scratch("cate");
  const auto csv = (dir / "s.csv").string();
  ASSERT_EQ(run({"simulate", "--scenario", "i", "--n", "300", "--seed", "8", "--out", csv}).code,
            0);
  const auto cfg = (dir / "c.json").string();
  std::ofstream(cfg) << R"({"learner": {"kind": "ridge_linear"},
                            "nuisance": {"F": {"model": "cox"}, "pi": {"model": "logistic"},
                                         "G": {"model": "cox"}, "S_D": {"model": "cox"}}})";
  const auto model = (dir / "m.json").string();
  const auto grid = (dir / "g.csv").string();
  const CliRun r = run({"estimate-cate", "--data", csv, "--config", cfg, "--out", model, "--grid-out",
                     grid, "--grid-size", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = read_json(model);
  EXPECT_EQ(j["config"]["learner"]["kind"], "ridge_linear");
  const CateModel m = CateModel::from_json(j);

  std::ifstream g(grid);
  std::string line;
  std::getline(g, line);
  EXPECT_EQ(line, "z1,z2,tau_hat");
  int n = 0;
  while (std::getline(g, line)) {
    const auto cells = detail::split_csv_line(line);
    ASSERT_EQ(cells.size(), 3u);
    const std::vector<double> z{detail::parse_double(cells[0], 1, 1),
                                detail::parse_double(cells[1], 1, 2)};
    EXPECT_NEAR(m.predict(z), detail::parse_double(cells[2], 1, 3), 1e-12);
    ++n;
  }
  EXPECT_EQ(n, 25);
}

}  // namespace
}  // namespace ltrc
