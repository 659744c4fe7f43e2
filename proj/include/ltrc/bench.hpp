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

// Replication benchmarks for the ATE table and the CATE MSE study.
//
// Each replication draws one sample from a seed derived from (seed, index)
// and runs every configured row on it, so rows share random numbers.
// Replications run in parallel; results are independent of the job count.

#ifndef LTRC_BENCH_HPP
#define LTRC_BENCH_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltrc/ate.hpp"
#include "ltrc/cate.hpp"
#include "ltrc/nuisance.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/sim.hpp"

namespace ltrc {

// One estimate from one replication. `value` is theta-hat for ATE cells and
// the MSE for CATE cells.
struct Replicate {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> se_boot;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

struct CellSummary {
  std::size_t ok = 0;
  std::size_t failed = 0;
  // ATE cells
  double bias = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;
  double cp = 0.0;
  std::optional<double> mean_boot_se;
  std::optional<double> boot_cp;
  // CATE cells
  double median = 0.0;
  double mean = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct Cell {
  std::string method;  // dr, dr_crossfit, ipw, full_data; or a CATE learner name
  std::string label;   // F/pi-G-S_D for ATE rows
  std::size_t n = 0;
  std::vector<Replicate> reps;
};

inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Coverage uses the normal interval at `level`.
inline CellSummary summarize_ate(const std::vector<Replicate>& reps, double truth,
                                 double level = 0.95) {
  const double z = AteResult::normal_quantile(level);
  CellSummary s;
  double sum = 0.0, sum_se = 0.0, cover = 0.0, sum_bse = 0.0, bcover = 0.0;
  std::size_t nb = 0;
  for (const auto& r : reps) {
    if (!r.ok()) {
      ++s.failed;
      continue;
    }
    ++s.ok;
    sum += r.value;
    sum_se += r.se;
    cover += std::abs(r.value - truth) <= z * r.se;
    if (r.se_boot) {
      ++nb;
      sum_bse += *r.se_boot;
      bcover += std::abs(r.value - truth) <= z * *r.se_boot;
    }
  }
  if (s.ok == 0) return s;
  const double k = static_cast<double>(s.ok);
  const double mean = sum / k;
  double ss = 0.0;
  for (const auto& r : reps) {
    if (r.ok()) ss += (r.value - mean) * (r.value - mean);
  }
  s.bias = mean - truth;
  s.sd = s.ok > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  s.mean_se = sum_se / k;
  s.cp = cover / k;
  if (nb) {
    s.mean_boot_se = sum_bse / static_cast<double>(nb);
    s.boot_cp = bcover / static_cast<double>(nb);
  }
  return s;
}

inline CellSummary summarize_mse(const std::vector<Replicate>& reps) {
  CellSummary s;
  std::vector<double> v;
  for (const auto& r : reps) {
    if (r.ok()) {
      v.push_back(r.value);
    } else {
      ++s.failed;
    }
  }
  s.ok = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q25 = quantile_sorted(v, 0.25);
  s.q75 = quantile_sorted(v, 0.75);
  return s;
}

struct BenchmarkResult {
  enum class Kind { kAte, kCate };
  Kind kind = Kind::kAte;
  std::string scenario;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double truth = 0.0;  // ATE only
  nlohmann::json config;
  std::vector<Cell> cells;

  CellSummary summary(const Cell& c) const {
    return kind == Kind::kAte ? summarize_ate(c.reps, truth) : summarize_mse(c.reps);
  }

  const Cell& cell(const std::string& method, const std::string& label = "",
                   std::size_t n = 0) const {
    for (const auto& c : cells) {
      if (c.method == method && (label.empty() || c.label == label) && (n == 0 || c.n == n)) {
        return c;
      }
    }
    throw ArgumentError("no benchmark cell " + method + " " + label);
  }
};

// ---------------------------------------------------------------------------
// ATE

struct AteRowSpec {
  std::string method = "dr";  // dr, dr_crossfit, ipw, full_data
  SchemeConfig cfg;

  std::string label() const {
    if (method == "full_data") return "";
    if (method == "ipw") return "-/" + cfg.pi.label() + "-" + cfg.g.label() + "-" + cfg.sd.label();
    return cfg.label();
  }
};

inline SchemeConfig scheme_from_labels(const std::string& f, const std::string& pi,
                                       const std::string& g, const std::string& sd) {
  auto model = [](const std::string& s) {
    using M = NuisanceSpec::Model;
    if (s == "Cox1") return M::kCox;
    if (s == "Cox2") return M::kCoxMisspec;
    if (s == "pCox") return M::kPCox;
    if (s == "lgs1") return M::kLogistic;
    if (s == "lgs2") return M::kLogisticMisspec;
    if (s == "gbm") return M::kGbm;
    throw ArgumentError("unknown model label: " + s);
  };
  SchemeConfig c;
  if (!f.empty() && f != "-") c.f = NuisanceSpec::of(model(f));
  c.pi = NuisanceSpec::of(model(pi));
  c.g = NuisanceSpec::of(model(g));
  c.sd = NuisanceSpec::of(model(sd));
  return c;
}

// The fifteen rows of the ATE table, in table order.
inline std::vector<AteRowSpec> table1_rows() {
  const char* dr[][4] = {{"Cox1", "lgs1", "Cox1", "Cox1"}, {"Cox2", "lgs1", "Cox1", "Cox1"},
                         {"Cox1", "lgs1", "Cox2", "Cox1"}, {"Cox1", "lgs2", "Cox1", "Cox1"},
                         {"Cox1", "lgs1", "Cox1", "Cox2"}, {"Cox2", "lgs1", "Cox2", "Cox1"},
                         {"Cox2", "lgs2", "Cox1", "Cox1"}, {"Cox2", "lgs1", "Cox1", "Cox2"}};
  std::vector<AteRowSpec> rows;
  for (const auto& r : dr) rows.push_back({"dr", scheme_from_labels(r[0], r[1], r[2], r[3])});
  rows.push_back({"dr_crossfit", scheme_from_labels("pCox", "gbm", "pCox", "pCox")});
  const char* ipw[][3] = {{"lgs1", "Cox1", "Cox1"}, {"lgs1", "Cox2", "Cox1"},
                          {"lgs2", "Cox1", "Cox1"}, {"lgs1", "Cox1", "Cox2"},
                          {"gbm", "pCox", "pCox"}};
  for (const auto& r : ipw) rows.push_back({"ipw", scheme_from_labels("-", r[0], r[1], r[2])});
  rows.push_back({"full_data", SchemeConfig{}});
  return rows;
}

struct AteBenchConfig {
  std::vector<AteRowSpec> rows = table1_rows();
  std::size_t n = 1000;
  std::size_t reps = 500;
  std::uint64_t seed = 1;
  std::size_t folds = 5;
  std::size_t bootstrap = 0;  // resamples per replication; 0 = model SE only
  double t0 = 3.0;            // nu(t) = 1(t > t0)
  std::optional<double> truth;  // otherwise Monte Carlo at truth_mc draws
  std::size_t truth_mc = 10'000'000;
  unsigned jobs = 1;

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& row : rows) {
      r.push_back({{"method", row.method}, {"label", row.label()}, {"nuisance", row.cfg.to_json()}});
    }
    nlohmann::json j{{"rows", r},        {"n", n},         {"reps", reps},
                     {"seed", seed},     {"folds", folds}, {"bootstrap", bootstrap},
                     {"t0", t0},         {"truth_mc", truth_mc}};
    if (truth) j["truth"] = *truth;
    return j;
  }
};

namespace detail {

template <class Nu>
AteResult run_ate_row(const AteRowSpec& row, const SimSample& sample, std::size_t folds, Nu&& nu,
                      std::uint64_t seed) {
  const Dataset& d = sample.observed;
  if (row.method == "dr") return solve_ate(d, fit_scheme_a(d, row.cfg, seed), nu);
  if (row.method == "dr_crossfit") return crossfit_ate(d, folds, row.cfg, nu, seed);
  if (row.method == "ipw") return ipw_ate(d, fit_weighting_models(d, row.cfg, seed), nu);
  if (row.method == "full_data") return full_data_ate(sample.full, nu);
  throw ArgumentError("unknown ATE method: " + row.method);
}

template <class Nu>
double row_point(const AteRowSpec& row, const Dataset& d, std::size_t folds, Nu&& nu,
                 std::uint64_t seed) {
  SimSample s;
  s.observed = d;
  return run_ate_row(row, s, folds, nu, seed).theta_hat;
}

}  // namespace detail

inline BenchmarkResult run_ate_benchmark(const AteBenchConfig& cfg) {
  if (cfg.reps < 1) throw ArgumentError("reps must be at least 1");
  const ScenarioSpec s = ScenarioSpec::ate();
  const Transform nu = Transform::survival_indicator(cfg.t0);
  BenchmarkResult out;
  out.kind = BenchmarkResult::Kind::kAte;
  out.scenario = "ate";
  out.reps = cfg.reps;
  out.seed = cfg.seed;
  out.truth = cfg.truth ? *cfg.truth : mc_true_theta(s, nu, cfg.truth_mc, derive_key(cfg.seed, {0x7247}));
  out.config = cfg.to_json();
  out.config["truth"] = out.truth;
  const bool need_full = std::any_of(cfg.rows.begin(), cfg.rows.end(),
                                     [](const auto& r) { return r.method == "full_data"; });
  for (const auto& row : cfg.rows) {
    Cell c{row.method, row.label(), cfg.n, std::vector<Replicate>(cfg.reps)};
    out.cells.push_back(std::move(c));
  }
  parallel_for(cfg.reps, cfg.jobs, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_key(cfg.seed, {0xDA7A, r});
    const SimSample sample = generate(s, cfg.n, rep_seed, need_full);
    for (std::size_t k = 0; k < cfg.rows.size(); ++k) {
      const auto& row = cfg.rows[k];
      Replicate& rep = out.cells[k].reps[r];
      rep.index = r;
      rep.seed = rep_seed;
      const std::uint64_t fit_seed = derive_key(rep_seed, {0xF17, k});
      try {
        const AteResult res = detail::run_ate_row(row, sample, cfg.folds, nu, fit_seed);
        rep.value = res.theta_hat;
        rep.se = res.se_model;
        if (cfg.bootstrap && row.method != "full_data") {
          const auto b = bootstrap_se(
              sample.observed,
              [&](const Dataset& d, std::uint64_t key) {
                return detail::row_point(row, d, cfg.folds, nu, key);
              },
              cfg.bootstrap, fit_seed);
          rep.se_boot = b.se;
        }
      } catch (const Error& e) {
        rep.error = "replication " + std::to_string(r) + ": " + e.what();
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// CATE

struct CateLearnerSpec {
  CateLoss loss = CateLoss::kR;
  bool oracle = false;
  double floor = 0.1;

  std::string name() const {
    std::string s = to_string(loss);
    if (oracle) s += "-o";
    if (floor != 0.1) s += "@" + detail::format_double(floor);
    return s;
  }

  static CateLearnerSpec parse(const std::string& text) {
    CateLearnerSpec l;
    std::string s = text;
    if (const auto at = s.find('@'); at != std::string::npos) {
      l.floor = std::stod(s.substr(at + 1));
      s = s.substr(0, at);
    }
    if (s.size() > 2 && s.substr(s.size() - 2) == "-o") {
      l.oracle = true;
      s = s.substr(0, s.size() - 2);
    }
    l.loss = parse_cate_loss(s);
    return l;
  }
};

struct CateBenchConfig {
  std::string scenario = "i";
  std::vector<std::size_t> sizes{500, 1000, 2000};
  std::vector<CateLearnerSpec> learners{{CateLoss::kR, false, 0.1},
                                        {CateLoss::kDR, false, 0.1},
                                        {CateLoss::kIpwS, false, 0.1},
                                        {CateLoss::kR, true, 0.1},
                                        {CateLoss::kDR, true, 0.1},
                                        {CateLoss::kIpwS, true, 0.1}};
  std::size_t reps = 50;
  std::uint64_t seed = 1;
  std::size_t folds = 5;
  SchemeConfig nuisance = flexible_scheme();
  LearnerConfig learner;
  int oracle_grid = 400;
  unsigned jobs = 1;

  static SchemeConfig flexible_scheme() {
    return scheme_from_labels("pCox", "gbm", "pCox", "pCox");
  }

  nlohmann::json to_json() const {
    std::vector<std::string> names;
    for (const auto& l : learners) names.push_back(l.name());
    return {{"scenario", scenario}, {"sizes", sizes},
            {"learners", names},    {"reps", reps},
            {"seed", seed},         {"folds", folds},
            {"nuisance", nuisance.to_json()}, {"learner", learner.to_json()},
            {"oracle_grid", oracle_grid}};
  }
};

// Learners in a replication share the fold fits; components are evaluated
// once per trimming floor.
inline BenchmarkResult run_cate_benchmark(const CateBenchConfig& cfg) {
  if (cfg.reps < 1) throw ArgumentError("reps must be at least 1");
  const ScenarioSpec s = ScenarioSpec::parse(cfg.scenario);
  if (!s.is_cate()) throw ArgumentError("CATE benchmark needs scenario i, ii or iii");
  const Transform nu = Transform::log();
  BenchmarkResult out;
  out.kind = BenchmarkResult::Kind::kCate;
  out.scenario = cfg.scenario;
  out.reps = cfg.reps;
  out.seed = cfg.seed;
  out.config = cfg.to_json();
  for (std::size_t n : cfg.sizes) {
    for (const auto& l : cfg.learners) {
      out.cells.push_back({l.name(), "", n, std::vector<Replicate>(cfg.reps)});
    }
  }
  const NuisanceBundle truth_bundle = true_bundle(s, 0.1, cfg.oracle_grid);
  const auto truth = [&s](std::span<const double> z) { return true_tau(s, z[0], z[1]); };
  const std::size_t nl = cfg.learners.size();
  const bool any_fitted = std::any_of(cfg.learners.begin(), cfg.learners.end(),
                                      [](const auto& l) { return !l.oracle; });

  parallel_for(cfg.sizes.size() * cfg.reps, cfg.jobs, [&](std::size_t job) {
    const std::size_t si = job / cfg.reps;
    const std::size_t r = job % cfg.reps;
    const std::size_t n = cfg.sizes[si];
    const std::uint64_t rep_seed = derive_key(cfg.seed, {0xCA7E, n, r});
    auto fail_all = [&](const std::string& msg) {
      for (std::size_t k = 0; k < nl; ++k) {
        auto& rep = out.cells[si * nl + k].reps[r];
        if (rep.ok() && std::isnan(rep.value)) rep.error = msg;
      }
    };
    try {
      const Dataset d = generate(s, n, rep_seed, false).observed;
      const FoldAssignment folds = make_folds(d.size(), cfg.folds, rep_seed);
      std::vector<NuisanceBundle> bundles;
      if (any_fitted) bundles = crossfit_bundles(d, folds, cfg.nuisance, rep_seed, 1);
      std::vector<std::pair<std::pair<bool, double>, std::vector<RecordComponents>>> cache;
      auto components = [&](bool oracle, double floor) -> const std::vector<RecordComponents>& {
        for (const auto& [key, c] : cache) {
          if (key.first == oracle && key.second == floor) return c;
        }
        std::vector<RecordComponents> c;
        if (oracle) {
          NuisanceBundle b = truth_bundle;
          b.trim_floor = floor;
          c = all_components(d, b, nu);
        } else {
          c = components_from_bundles(d, folds, bundles, nu, floor);
        }
        cache.push_back({{oracle, floor}, std::move(c)});
        return cache.back().second;
      };
      for (std::size_t k = 0; k < nl; ++k) {
        const auto& l = cfg.learners[k];
        auto& rep = out.cells[si * nl + k].reps[r];
        rep.index = r;
        rep.seed = rep_seed;
        try {
          const CateFit fit = fit_from_components(d, components(l.oracle, l.floor), l.loss,
                                                  l.floor, cfg.learner, derive_key(rep_seed, {k}));
          rep.value = evaluate_mse(fit.model, d, truth);
        } catch (const Error& e) {
          rep.error = "replication " + std::to_string(r) + ": " + e.what();
        }
      }
    } catch (const Error& e) {
      fail_all("replication " + std::to_string(r) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace ltrc

#endif  // LTRC_BENCH_HPP
