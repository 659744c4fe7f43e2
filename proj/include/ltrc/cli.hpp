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

// Command-line front end. Each subcommand resolves one JSON config from
// built-in defaults, an optional --config file and explicit flags, in that
// order of precedence; the resolved config is echoed with every result.
// Exit codes: 0 success, 1 usage or config error, 2 computation error.

#ifndef LTRC_CLI_HPP
#define LTRC_CLI_HPP

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltrc/ate.hpp"
#include "ltrc/bench.hpp"
#include "ltrc/cate.hpp"
#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/report.hpp"
#include "ltrc/sim.hpp"

namespace ltrc::cli {

using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("LTRC_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("LTRC_SEED is not an unsigned integer: ") + env);
  }
  return 1;
}

inline json scheme_defaults(const SchemeConfig& c) {
  json j = c.to_json();
  j.erase("trim_floor");
  return j;
}

inline LearnerConfig desk_learner() {
  LearnerConfig l;
  return l;
}

// Defaults per subcommand; keys double as the config-file schema.
inline json command_defaults(const std::string& cmd) {
  const auto seed = default_seed();
  const json nu_ind = Transform::survival_indicator(3.0).to_json();
  const json nu_log = Transform::log().to_json();
  if (cmd == "simulate") {
    return {{"scenario", "ate"}, {"n", 1000}, {"seed", seed}, {"out", ""}, {"full_out", ""}};
  }
  if (cmd == "estimate-ate") {
    return {{"data", ""},      {"p", 0},          {"method", "dr"},
            {"nuisance", scheme_defaults(SchemeConfig{})},
            {"nu", nu_ind},    {"folds", 5},      {"trim_floor", 0.1},
            {"bootstrap", 0},  {"seed", seed},    {"out", ""}};
  }
  if (cmd == "estimate-cate") {
    return {{"data", ""},      {"p", 0},           {"loss", "ltrcR"},
            {"columns", json::array()},
            {"nuisance", scheme_defaults(CateBenchConfig::flexible_scheme())},
            {"learner", desk_learner().to_json()},
            {"nu", nu_log},    {"folds", 5},       {"trim_floor", 0.1},
            {"seed", seed},    {"out", ""},        {"grid_out", ""},
            {"grid_size", 21}};
  }
  if (cmd == "bench-ate") {
    return {{"rows", json::array()}, {"n", 1000},    {"reps", 500},
            {"seed", seed},          {"folds", 5},   {"bootstrap", 0},
            {"t0", 3.0},             {"truth", nullptr},
            {"truth_mc", 10000000},  {"out", "results"}};
  }
  if (cmd == "bench-cate") {
    std::vector<std::string> names;
    for (const auto& l : CateBenchConfig{}.learners) names.push_back(l.name());
    return {{"scenario", "i"},
            {"sizes", {500, 1000, 2000}},
            {"learners", names},
            {"reps", 50},
            {"seed", seed},
            {"folds", 5},
            {"nuisance", scheme_defaults(CateBenchConfig::flexible_scheme())},
            {"learner", desk_learner().to_json()},
            {"oracle_grid", 400},
            {"out", "results"}};
  }
  if (cmd == "validate") return {{"data", ""}, {"p", 0}, {"target", ""}};
  throw UsageError("unknown command: " + cmd);
}

inline bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_number()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

// File values over defaults; unknown keys and type mismatches are rejected.
inline json merge_file(json cfg, const json& file, const std::string& cmd) {
  if (!file.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, v] : file.items()) {
    if (key == "jobs") continue;  // handled with the flag
    if (!cfg.contains(key)) throw UsageError("unknown config key for " + cmd + ": " + key);
    if (!same_kind(cfg[key], v)) throw UsageError("config key '" + key + "' has the wrong type");
    cfg[key] = v;
  }
  return cfg;
}

inline json read_json_file(const std::string& path, const std::string& flag) {
  std::ifstream in(path);
  if (!in) throw UsageError(flag + ": cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(flag + ": invalid JSON in " + path + ": " + e.what());
  }
}

inline std::size_t csv_dimension(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--data: cannot open " + path);
  std::string header;
  std::getline(in, header);
  const auto cols = detail::split_csv_line(header);
  if (cols.size() < 4) throw UsageError("--data: header needs q,x,delta,a[,z1..]");
  return cols.size() - 4;
}

inline Dataset load_data(const json& cfg) {
  const std::string path = cfg.at("data").get<std::string>();
  if (path.empty()) throw UsageError("--data is required");
  std::size_t p = cfg.at("p").get<std::size_t>();
  if (p == 0) p = csv_dimension(path);
  return load_observed_csv(path, p);
}

// Parsed subcommand: config resolution happens after CLI11 parsing.
struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::function<void(json&)>> overlays;

  template <class T>
  void option(const std::string& flags, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flags, *value, help);
    overlays.push_back([value, opt, key](json& cfg) {
      if (opt->count() > 0) cfg[key] = *value;
    });
  }

  json resolve() const {
    json cfg = command_defaults(name);
    // validate reads --config against the --target schema instead.
    if (!config_path.empty() && name != "validate") {
      cfg = merge_file(cfg, read_json_file(config_path, "--config"), name);
    }
    for (const auto& o : overlays) o(cfg);
    return cfg;
  }
};

inline SchemeConfig scheme_of(const json& cfg) {
  SchemeConfig s;
  try {
    s = SchemeConfig::from_json(cfg.at("nuisance"));
  } catch (const SchemaError& e) {
    throw UsageError(std::string("nuisance: ") + e.what());
  }
  s.trim_floor = cfg.at("trim_floor").get<double>();
  if (!(s.trim_floor > 0.0 && s.trim_floor < 0.5)) {
    throw UsageError("--trim-floor must lie in (0, 0.5)");
  }
  return s;
}

inline Transform nu_of(const json& cfg) {
  try {
    return Transform::from_json(cfg.at("nu"));
  } catch (const SchemaError& e) {
    throw UsageError(std::string("nu: ") + e.what());
  }
}

inline LearnerConfig learner_of(const json& cfg, unsigned jobs) {
  LearnerConfig l;
  try {
    l = LearnerConfig::from_json(cfg.at("learner"));
  } catch (const SchemaError& e) {
    throw UsageError(std::string("learner: ") + e.what());
  }
  l.tuning.jobs = jobs;
  return l;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------
// Subcommand bodies; `prepare` validates and returns the work as a closure so
// usage errors surface before any computation.

using Work = std::function<void(std::ostream&)>;

inline Work prepare_simulate(const json& cfg) {
  const ScenarioSpec s = [&] {
    try {
      return ScenarioSpec::parse(cfg.at("scenario").get<std::string>());
    } catch (const Error& e) {
      throw UsageError(std::string("--scenario: ") + e.what());
    }
  }();
  const auto n = cfg.at("n").get<std::size_t>();
  if (n == 0) throw UsageError("--n must be at least 1");
  const std::string out = cfg.at("out").get<std::string>();
  if (out.empty()) throw UsageError("--out is required");
  return [=](std::ostream& os) {
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const std::string full_out = cfg.at("full_out").get<std::string>();
    const SimSample sample = generate(s, n, seed, true);
    write_observed_csv(out, sample.observed);
    const auto rep = validate(sample.observed);
    const double trunc = 1.0 - static_cast<double>(n) / static_cast<double>(sample.full.size());
    json meta{{"config", cfg},
              {"attempted", sample.full.size()},
              {"truncation_rate", trunc},
              {"censoring_rate", rep.censoring_rate},
              {"treated_fraction", rep.treated_fraction}};
    write_text(out + ".json", meta.dump(2) + "\n");
    if (!full_out.empty()) {
      std::ofstream f(full_out);
      if (!f) throw Error("cannot write " + full_out);
      f << "t1,t0,q,d,a";
      for (std::size_t j = 1; j <= 2; ++j) f << ",z" << j;
      f << '\n';
      for (const auto& r : sample.full) {
        f << detail::format_double(r.t1) << ',' << detail::format_double(r.t0) << ','
          << detail::format_double(r.q) << ',' << detail::format_double(r.d) << ',' << r.a;
        for (double z : r.z) f << ',' << detail::format_double(z);
        f << '\n';
      }
    }
    os << "simulate " << s.name() << " n=" << n << " attempted=" << sample.full.size()
       << " truncation=" << fixed(trunc, 4) << " censoring=" << fixed(rep.censoring_rate, 4)
       << " treated=" << fixed(rep.treated_fraction, 4) << " -> " << out << '\n';
  };
}

inline Work prepare_estimate_ate(const json& cfg, unsigned jobs) {
  const SchemeConfig scheme = scheme_of(cfg);
  const Transform nu = nu_of(cfg);
  const std::string method = cfg.at("method").get<std::string>();
  if (method != "dr" && method != "dr_crossfit" && method != "ipw") {
    throw UsageError("--method must be dr, dr_crossfit or ipw");
  }
  const auto folds = cfg.at("folds").get<std::size_t>();
  if (folds < 2) throw UsageError("--folds must be at least 2");
  const Dataset data = load_data(cfg);
  return [=](std::ostream& os) {
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const AteRowSpec row{method, scheme};
    SimSample sample;
    sample.observed = data;
    AteResult res = detail::run_ate_row(row, sample, folds, nu, seed);
    if (const auto b = cfg.at("bootstrap").get<std::size_t>(); b > 0) {
      const auto boot = bootstrap_se(
          data,
          [&](const Dataset& d, std::uint64_t key) {
            return detail::row_point(row, d, folds, nu, key);
          },
          b, seed, jobs);
      res.se_boot = boot.se;
      res.boot_failures = boot.failures;
    }
    json j = res.to_json();
    j["config"] = cfg;
    const std::string out = cfg.at("out").get<std::string>();
    os << "estimate-ate " << method << " " << scheme.label() << " theta=" << fixed(res.theta_hat, 6)
       << " se=" << fixed(res.se(), 6) << " ci=[" << fixed(res.ci_lower(res.se()), 6) << ", "
       << fixed(res.ci_upper(res.se()), 6) << "] n=" << res.n << '\n';
    if (out.empty()) {
      os << j.dump(2) << '\n';
    } else {
      write_text(out, j.dump(2) + "\n");
    }
  };
}

inline void write_grid(const std::string& path, const CateModel& m, const Dataset& data,
                       int size) {
  const std::size_t p = data.p;
  std::vector<double> lo(p, 0.0), hi(p, 0.0), mid(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> v;
    for (const auto& r : data.records) v.push_back(r.z[j]);
    std::sort(v.begin(), v.end());
    lo[j] = v.front();
    hi[j] = v.back();
    mid[j] = quantile_sorted(v, 0.5);
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "z1,z2,tau_hat\n";
  const std::size_t j2 = p > 1 ? 1 : 0;
  for (int a = 0; a < size; ++a) {
    for (int b = 0; b < (p > 1 ? size : 1); ++b) {
      std::vector<double> z = mid;
      z[0] = lo[0] + (hi[0] - lo[0]) * a / std::max(1, size - 1);
      if (p > 1) z[j2] = lo[j2] + (hi[j2] - lo[j2]) * b / std::max(1, size - 1);
      f << detail::format_double(z[0]) << ',' << (p > 1 ? detail::format_double(z[j2]) : "")
        << ',' << detail::format_double(m.predict(z)) << '\n';
    }
  }
}

inline Work prepare_estimate_cate(const json& cfg, unsigned jobs) {
  const SchemeConfig scheme = scheme_of(cfg);
  const Transform nu = nu_of(cfg);
  const LearnerConfig learner = learner_of(cfg, jobs);
  CateLoss loss;
  try {
    loss = parse_cate_loss(cfg.at("loss").get<std::string>());
  } catch (const Error& e) {
    throw UsageError(std::string("--loss: ") + e.what());
  }
  const auto columns = cfg.at("columns").get<std::vector<int>>();
  const auto folds = cfg.at("folds").get<std::size_t>();
  if (folds < 2) throw UsageError("--folds must be at least 2");
  const int grid = cfg.at("grid_size").get<int>();
  if (grid < 2) throw UsageError("--grid-size must be at least 2");
  const Dataset data = load_data(cfg);
  for (int c : columns) {
    if (c < 0 || static_cast<std::size_t>(c) >= data.p) {
      throw UsageError("--columns: index " + std::to_string(c) + " out of range");
    }
  }
  return [=](std::ostream& os) {
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const CateFit fit = crossfit_cate(data, loss, scheme, learner, folds, nu, seed, jobs, columns);
    json j = fit.model.to_json();
    j["config"] = cfg;
    j["trim_event_count"] = fit.trim_event_count;
    const std::string out = cfg.at("out").get<std::string>();
    os << "estimate-cate " << to_string(loss) << " n=" << data.size()
       << " dropped=" << fit.model.dropped << " training_loss=" << fit.model.training_loss
       << '\n';
    if (out.empty()) {
      os << j.dump(2) << '\n';
    } else {
      write_text(out, j.dump(2) + "\n");
    }
    if (const auto g = cfg.at("grid_out").get<std::string>(); !g.empty()) {
      write_grid(g, fit.model, data, grid);
    }
  };
}

inline void print_cells(std::ostream& os, const BenchmarkResult& r) {
  for (const auto& c : r.cells) {
    const CellSummary s = r.summary(c);
    if (r.kind == BenchmarkResult::Kind::kAte) {
      os << c.method << ' ' << (c.label.empty() ? "-" : c.label) << " bias=" << fixed(s.bias, 4)
         << " sd=" << fixed(s.sd, 4) << " se=" << fixed(s.mean_se, 4) << " cp=" << fixed(s.cp, 3);
      if (s.mean_boot_se) {
        os << " boot_se=" << fixed(*s.mean_boot_se, 4) << " boot_cp=" << fixed(*s.boot_cp, 3);
      }
    } else {
      char buf[96];
      std::snprintf(buf, sizeof(buf), " median_mse=%.4e", s.median);
      os << c.method << " n=" << c.n << buf;
    }
    os << " ok=" << s.ok << " failed=" << s.failed << '\n';
  }
}

inline Work prepare_bench_ate(const json& cfg, unsigned jobs) {
  AteBenchConfig b;
  const auto all = table1_rows();
  const auto rows = cfg.at("rows").get<std::vector<int>>();
  if (!rows.empty()) {
    b.rows.clear();
    for (int k : rows) {
      if (k < 1 || static_cast<std::size_t>(k) > all.size()) {
        throw UsageError("--table1-row must lie in 1.." + std::to_string(all.size()));
      }
      b.rows.push_back(all[k - 1]);
    }
  }
  b.n = cfg.at("n").get<std::size_t>();
  b.reps = cfg.at("reps").get<std::size_t>();
  if (b.reps < 1 || b.n < 10) throw UsageError("--reps must be >= 1 and --n >= 10");
  b.seed = cfg.at("seed").get<std::uint64_t>();
  b.folds = cfg.at("folds").get<std::size_t>();
  b.bootstrap = cfg.at("bootstrap").get<std::size_t>();
  b.t0 = cfg.at("t0").get<double>();
  if (!cfg.at("truth").is_null()) b.truth = cfg.at("truth").get<double>();
  b.truth_mc = cfg.at("truth_mc").get<std::size_t>();
  b.jobs = jobs;
  std::string tag = "table1";
  if (rows.size() == 1) tag += "-row" + std::to_string(rows[0]);
  const std::string out = cfg.at("out").get<std::string>();
  return [=](std::ostream& os) {
    BenchmarkResult r = run_ate_benchmark(b);
    r.config["cli"] = cfg;
    const ReportPaths p = emit_report(r, out, tag);
    os << "bench-ate truth=" << fixed(r.truth, 5) << " reps=" << r.reps << " n=" << b.n << '\n';
    print_cells(os, r);
    os << "wrote " << p.csv << ' ' << p.json << ' ' << p.markdown << '\n';
  };
}

inline Work prepare_bench_cate(const json& cfg, unsigned jobs) {
  CateBenchConfig b;
  b.scenario = cfg.at("scenario").get<std::string>();
  try {
    if (!ScenarioSpec::parse(b.scenario).is_cate()) throw ArgumentError("not a CATE scenario");
  } catch (const Error& e) {
    throw UsageError("--scenario: " + b.scenario + " (" + e.what() + ")");
  }
  b.sizes = cfg.at("sizes").get<std::vector<std::size_t>>();
  b.learners.clear();
  for (const auto& name : cfg.at("learners").get<std::vector<std::string>>()) {
    try {
      b.learners.push_back(CateLearnerSpec::parse(name));
    } catch (const std::exception& e) {
      throw UsageError("--learners: " + name + " (" + e.what() + ")");
    }
  }
  if (b.sizes.empty() || b.learners.empty()) throw UsageError("--sizes and --learners are required");
  b.reps = cfg.at("reps").get<std::size_t>();
  if (b.reps < 1) throw UsageError("--reps must be >= 1");
  b.seed = cfg.at("seed").get<std::uint64_t>();
  b.folds = cfg.at("folds").get<std::size_t>();
  b.nuisance = scheme_of(json{{"nuisance", cfg.at("nuisance")}, {"trim_floor", 0.1}});
  b.learner = learner_of(cfg, 1);
  b.oracle_grid = cfg.at("oracle_grid").get<int>();
  b.jobs = jobs;
  const std::string out = cfg.at("out").get<std::string>();
  return [=](std::ostream& os) {
    BenchmarkResult r = run_cate_benchmark(b);
    r.config["cli"] = cfg;
    const ReportPaths p = emit_report(r, out, "cate");
    os << "bench-cate scenario=" << b.scenario << " reps=" << r.reps << '\n';
    print_cells(os, r);
    os << "wrote " << p.csv << ' ' << p.json << ' ' << p.markdown << '\n';
  };
}

inline Work prepare_validate(const json& cfg, const std::string& config_path) {
  const std::string target = cfg.at("target").get<std::string>();
  if (!target.empty()) {
    if (config_path.empty()) throw UsageError("--target needs --config");
    // Reuses the target's resolution and preparation checks without running it.
    json resolved = merge_file(command_defaults(target), read_json_file(config_path, "--config"),
                               target);
    if (target == "estimate-ate" || target == "estimate-cate") {
      scheme_of(resolved);
      nu_of(resolved);
    }
    if (target == "estimate-cate" || target == "bench-cate") learner_of(resolved, 1);
    return [resolved, target](std::ostream& os) {
      os << "validate config for " << target << ": ok\n" << resolved.dump(2) << '\n';
    };
  }
  const Dataset data = load_data(cfg);
  return [data](std::ostream& os) {
    const auto rep = validate(data);
    os << "validate n=" << rep.n << " violations=" << rep.violations.size() << '\n'
       << rep.to_json().dump(2) << '\n';
    if (!rep.ok()) throw DomainError("dataset has validation violations");
  };
}

// ---------------------------------------------------------------------------

inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Doubly robust ATE and CATE estimation under left truncation and right censoring",
               "ltrc_bench"};
  app.require_subcommand(1);
  unsigned jobs = default_jobs();
  app.add_option("--jobs", jobs, "worker threads for replications and bootstraps")
      ->check(CLI::PositiveNumber);

  std::map<std::string, Command> cmds;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = cmds[name];
    c.name = name;
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--config", c.config_path, "JSON config file (flags take precedence)");
    c.app->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    return c;
  };

  Command& sim = add("simulate", "draw an observed sample from a simulation scenario");
  sim.option<std::string>("--scenario", "scenario", "ate, i, ii or iii");
  sim.option<std::size_t>("--n", "n", "observed sample size");
  sim.option<std::uint64_t>("--seed", "seed", "random seed");
  sim.option<std::string>("--out", "out", "output CSV");
  sim.option<std::string>("--full-out", "full_out", "optional CSV of every attempted draw");

  Command& ate = add("estimate-ate", "estimate the ATE on an observed CSV");
  ate.option<std::string>("--data", "data", "input CSV (q,x,delta,a,z1..zp)");
  ate.option<std::size_t>("--p", "p", "covariate count (default: from header)");
  ate.option<std::string>("--method", "method", "dr, dr_crossfit or ipw");
  ate.option<std::size_t>("--folds", "folds", "cross-fitting folds");
  ate.option<double>("--trim-floor", "trim_floor", "probability floor");
  ate.option<std::size_t>("--bootstrap", "bootstrap", "bootstrap resamples (0 = off)");
  ate.option<std::uint64_t>("--seed", "seed", "random seed");
  ate.option<std::string>("--out", "out", "output JSON (default: stdout)");

  Command& cate = add("estimate-cate", "fit a CATE learner on an observed CSV");
  cate.option<std::string>("--data", "data", "input CSV (q,x,delta,a,z1..zp)");
  cate.option<std::size_t>("--p", "p", "covariate count (default: from header)");
  cate.option<std::string>("--loss", "loss", "ltrcR, ltrcDR or ipwS");
  cate.option<std::vector<int>>("--columns", "columns", "effect-modifier columns (0-based)");
  cate.option<std::size_t>("--folds", "folds", "cross-fitting folds");
  cate.option<double>("--trim-floor", "trim_floor", "probability floor");
  cate.option<std::uint64_t>("--seed", "seed", "random seed");
  cate.option<std::string>("--out", "out", "output model JSON (default: stdout)");
  cate.option<std::string>("--grid-out", "grid_out", "CSV of tau-hat on a covariate grid");
  cate.option<int>("--grid-size", "grid_size", "grid points per axis");

  Command& bate = add("bench-ate", "ATE replication benchmark (table layout)");
  bate.option<std::vector<int>>("--table1-row", "rows", "row numbers 1..15 (default: all)");
  bate.option<std::size_t>("--n", "n", "observed sample size");
  bate.option<std::size_t>("--reps", "reps", "replications");
  bate.option<std::uint64_t>("--seed", "seed", "random seed");
  bate.option<std::size_t>("--folds", "folds", "cross-fitting folds");
  bate.option<std::size_t>("--bootstrap", "bootstrap", "bootstrap resamples per replication");
  bate.option<double>("--truth", "truth", "true ATE (skips the Monte Carlo truth)");
  bate.option<std::size_t>("--truth-mc", "truth_mc", "Monte Carlo draws for the truth");
  bate.option<std::string>("--out", "out", "output directory");

  Command& bcate = add("bench-cate", "CATE MSE replication benchmark");
  bcate.option<std::string>("--scenario", "scenario", "i, ii or iii");
  bcate.option<std::vector<std::size_t>>("--sizes", "sizes", "observed sample sizes");
  bcate.option<std::vector<std::string>>("--learners", "learners",
                                         "e.g. ltrcR ltrcDR ipwS ltrcR-o ltrcDR@0.05");
  bcate.option<std::size_t>("--reps", "reps", "replications");
  bcate.option<std::uint64_t>("--seed", "seed", "random seed");
  bcate.option<std::size_t>("--folds", "folds", "cross-fitting folds");
  bcate.option<std::string>("--out", "out", "output directory");

  Command& val = add("validate", "check a data file, or a config file against a command");
  val.option<std::string>("--data", "data", "input CSV");
  val.option<std::size_t>("--p", "p", "covariate count (default: from header)");
  val.option<std::string>("--target", "target", "command whose config schema to check");

  std::vector<std::string> argv_store{"ltrc_bench"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  Work work;
  std::string which;
  try {
    for (auto& [name, c] : cmds) {
      if (!c.app->parsed()) continue;
      which = name;
      const json cfg = c.resolve();
      out << "# config " << json{{"command", name}, {"jobs", jobs}, {"resolved", cfg}}.dump()
          << '\n';
      if (name == "simulate") work = prepare_simulate(cfg);
      else if (name == "estimate-ate") work = prepare_estimate_ate(cfg, jobs);
      else if (name == "estimate-cate") work = prepare_estimate_cate(cfg, jobs);
      else if (name == "bench-ate") work = prepare_bench_ate(cfg, jobs);
      else if (name == "bench-cate") work = prepare_bench_cate(cfg, jobs);
      else if (name == "validate") work = prepare_validate(cfg, c.config_path);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    err << "usage error: config value has the wrong type: " << e.what() << '\n';
    return 1;
  } catch (const SchemaError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  try {
    work(out);
  } catch (const std::exception& e) {
    err << which << " failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace ltrc::cli

#endif  // LTRC_CLI_HPP
