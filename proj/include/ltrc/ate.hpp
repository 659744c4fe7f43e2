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

// Doubly robust ATE under left truncation and right censoring.
//
// For record i with fitted nuisances, the estimating function is
//   U_i(theta) = w_i {V_i(nu) - V_i(1) mu(A_i, Z_i)} + V_i(1) {mu(1, Z_i) - mu(0, Z_i) - theta},
//   w_i = (A_i - pi_i) / {pi_i (1 - pi_i)},  pi_i trimmed into [floor, 1 - floor],
// which is linear in theta, so theta_hat = sum(N_i) / sum(V_i(1)).

#ifndef LTRC_ATE_HPP
#define LTRC_ATE_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/nuisance.hpp"
#include "ltrc/operators.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {

// Per-record quantities shared by the ATE and CATE estimators.
struct RecordComponents {
  double v_nu = 0.0;
  double v_one = 0.0;
  double mu1 = 0.0;
  double mu0 = 0.0;
  double pi = 0.5;     // untrimmed
  double ipcw = 0.0;   // delta / {trim G(x) trim S_D(x - q)}
  int a = 0;

  double mu_a() const { return a ? mu1 : mu0; }
};

inline double trimmed_propensity(double pi, double floor) {
  return std::clamp(pi, floor, 1.0 - floor);
}

template <class Nu>
RecordComponents record_components(const ObservedRecord& r, const NuisanceBundle& b, Nu&& nu,
                                   TrimCounter* counter = nullptr) {
  if (r.a != 0 && r.a != 1) throw DomainError("treatment must be binary");
  if (b.pi.empty() || b.f.empty() || b.g.empty() || b.sd.empty()) {
    throw ArgumentError("nuisance bundle is incomplete");
  }
  const Subject s{r.q, r.a, r.z};
  const StepFunction f1 = b.f.evaluate({r.q, 1, r.z});
  const StepFunction f0 = b.f.evaluate({r.q, 0, r.z});
  RecordNuisance n{r.a ? f1 : f0, b.g.evaluate(s), b.sd.evaluate(s)};
  const VPair v = v_closed_form(r, n, nu, b.trim_floor, counter);
  RecordComponents c;
  if (r.delta) {
    c.ipcw = 1.0 / (trim_probability(n.g(r.x), b.trim_floor) *
                    trim_probability(n.sd(r.x - r.q), b.trim_floor));
  }
  c.v_nu = v.v_nu;
  c.v_one = v.v_one;
  c.mu1 = mu(f1, nu);
  c.mu0 = mu(f0, nu);
  c.pi = b.pi.predict(s);
  c.a = r.a;
  if (counter) {
    const double p = c.pi;
    if (p < b.trim_floor || 1.0 - p < b.trim_floor) ++counter->events;
  }
  return c;
}

template <class Nu>
std::vector<RecordComponents> all_components(const Dataset& data, const NuisanceBundle& b,
                                             Nu&& nu, TrimCounter* counter = nullptr) {
  std::vector<RecordComponents> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(record_components(r, b, nu, counter));
  return out;
}

// Numerator term N_i; U_i(theta) = N_i - V_i(1) theta.
inline double ate_numerator(const RecordComponents& c, double floor) {
  const double p = trimmed_propensity(c.pi, floor);
  const double w = (c.a - p) / (p * (1.0 - p));
  return w * (c.v_nu - c.v_one * c.mu_a()) + c.v_one * (c.mu1 - c.mu0);
}

inline double u_from_components(const RecordComponents& c, double theta, double floor) {
  return ate_numerator(c, floor) - c.v_one * theta;
}

template <class Nu>
double u_value(const ObservedRecord& r, double theta, const NuisanceBundle& b, Nu&& nu) {
  return u_from_components(record_components(r, b, nu), theta, b.trim_floor);
}

struct AteResult {
  std::string method;  // dr, dr_crossfit, ipw, full_data
  double theta_hat = 0.0;
  double se_model = 0.0;
  std::optional<double> se_boot;
  std::size_t boot_failures = 0;
  double ci_level = 0.95;
  std::size_t trim_event_count = 0;
  std::size_t folds = 0;
  std::size_t n = 0;
  double sum_u = 0.0;  // sum of U_i at theta_hat
  nlohmann::json provenance;

  static double normal_quantile(double level) {
    // Two-sided z for the usual levels; Acklam-free inversion by bisection on erfc.
    const double target = 0.5 * (1.0 - level);
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(mid / std::sqrt(2.0)) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double se() const { return se_boot.value_or(se_model); }
  double ci_lower(double se_used) const { return theta_hat - normal_quantile(ci_level) * se_used; }
  double ci_upper(double se_used) const { return theta_hat + normal_quantile(ci_level) * se_used; }

  nlohmann::json to_json() const {
    nlohmann::json j{{"method", method},
                     {"theta_hat", theta_hat},
                     {"se_model", se_model},
                     {"ci_level", ci_level},
                     {"ci_model", {ci_lower(se_model), ci_upper(se_model)}},
                     {"trim_event_count", trim_event_count},
                     {"n", n}};
    if (folds) j["folds"] = folds;
    if (se_boot) {
      j["se_boot"] = *se_boot;
      j["ci_boot"] = {ci_lower(*se_boot), ci_upper(*se_boot)};
      j["boot_failures"] = boot_failures;
    }
    if (!provenance.is_null()) j["provenance"] = provenance;
    return j;
  }
};

// Closed-form solve of sum U_i(theta) = 0 with the model-based SE.
inline AteResult solve_from_components(const std::vector<RecordComponents>& comps, double floor,
                                       std::string method) {
  double num = 0.0, den = 0.0;
  for (const auto& c : comps) {
    num += ate_numerator(c, floor);
    den += c.v_one;
  }
  if (std::abs(den) < 1e-10) throw DegenerateError("sum of V_i(1) is numerically zero");
  AteResult res;
  res.method = std::move(method);
  res.n = comps.size();
  res.theta_hat = num / den;
  double ss = 0.0, su = 0.0;
  for (const auto& c : comps) {
    const double u = u_from_components(c, res.theta_hat, floor);
    ss += u * u;
    su += u;
  }
  res.sum_u = su;
  res.se_model = std::sqrt(ss) / std::abs(den);
  return res;
}

template <class Nu>
AteResult solve_ate(const Dataset& data, const NuisanceBundle& b, Nu&& nu) {
  require_valid(data);
  TrimCounter counter;
  const auto comps = all_components(data, b, nu, &counter);
  AteResult res = solve_from_components(comps, b.trim_floor, "dr");
  res.trim_event_count = counter.events;
  res.provenance = b.provenance();
  return res;
}

// Nuisances fit on the out-of-fold data of each fold (entry f is fold f + 1);
// fold fits run on `jobs` threads.
inline std::vector<NuisanceBundle> crossfit_bundles(const Dataset& data, const FoldAssignment& folds,
                                                    const SchemeConfig& cfg, std::uint64_t seed,
                                                    unsigned jobs) {
  std::vector<NuisanceBundle> out(folds.k);
  parallel_for(folds.k, jobs, [&](std::size_t f) {
    const int fold = static_cast<int>(f) + 1;
    try {
      out[f] = fit_scheme_a(data.subset(folds.complement(fold)), cfg, derive_key(seed, {0xCF, f}));
    } catch (const Error& e) {
      throw FoldFitError(fold, e.what());
    }
  });
  return out;
}

// Fold-matched components; `floor` overrides the bundles' evaluation floor
// when positive, so one set of fits serves several floors.
template <class Nu>
std::vector<RecordComponents> components_from_bundles(const Dataset& data,
                                                      const FoldAssignment& folds,
                                                      std::vector<NuisanceBundle> bundles, Nu&& nu,
                                                      double floor = 0.0,
                                                      std::size_t* trim_events = nullptr) {
  std::vector<RecordComponents> comps(data.size());
  TrimCounter counter;
  for (std::size_t f = 0; f < bundles.size(); ++f) {
    if (floor > 0.0) bundles[f].trim_floor = floor;
    for (std::size_t i : folds.members(static_cast<int>(f) + 1)) {
      comps[i] = record_components(data[i], bundles[f], nu, &counter);
    }
  }
  if (trim_events) *trim_events = counter.events;
  return comps;
}

template <class Nu>
std::vector<RecordComponents> crossfit_components(const Dataset& data, const FoldAssignment& folds,
                                                  const SchemeConfig& cfg, Nu&& nu,
                                                  std::uint64_t seed, unsigned jobs,
                                                  std::size_t* trim_events = nullptr) {
  return components_from_bundles(data, folds, crossfit_bundles(data, folds, cfg, seed, jobs), nu,
                                 0.0, trim_events);
}

template <class Nu>
AteResult crossfit_ate(const Dataset& data, std::size_t k, const SchemeConfig& cfg, Nu&& nu,
                       std::uint64_t seed, unsigned jobs = 1) {
  require_valid(data);
  const FoldAssignment folds = make_folds(data.size(), k, seed);
  std::size_t events = 0;
  const auto comps = crossfit_components(data, folds, cfg, nu, seed, jobs, &events);
  AteResult res = solve_from_components(comps, cfg.trim_floor, "dr_crossfit");
  res.folds = k;
  res.trim_event_count = events;
  res.provenance = {{"config", cfg.to_json()}, {"seed", seed}};
  return res;
}

// Hajek IPW contrast with per-record weight
//   delta / {trim G(x) trim S_D(x - q)} * {A / pi or (1 - A) / (1 - pi)},
// and a sandwich SE that treats the weights as known.
template <class Nu>
AteResult ipw_ate(const Dataset& data, const NuisanceBundle& b, Nu&& nu) {
  require_valid(data);
  if (b.pi.empty() || b.g.empty() || b.sd.empty()) {
    throw ArgumentError("IPW needs pi, G and S_D");
  }
  const double fl = b.trim_floor;
  const std::size_t n = data.size();
  std::vector<double> w(n, 0.0), y(n, 0.0);
  double s1 = 0.0, s0 = 0.0, m1 = 0.0, m0 = 0.0;
  std::size_t events = 0;
  auto tr = [&](double p) {
    if (p < fl) ++events;
    return trim_probability(p, fl);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = data[i];
    if (!r.delta) continue;
    const Subject s{r.q, r.a, r.z};
    const double pi = b.pi.predict(s);
    if (pi < fl || 1.0 - pi < fl) ++events;
    const double p = trimmed_propensity(pi, fl);
    w[i] = 1.0 / (tr(b.g.at(r.x, s)) * tr(b.sd.at(r.x - r.q, s)) * (r.a ? p : 1.0 - p));
    y[i] = nu(r.x);
    (r.a ? s1 : s0) += w[i];
    (r.a ? m1 : m0) += w[i] * y[i];
  }
  if (!(s1 > 0.0) || !(s0 > 0.0)) throw DegenerateError("IPW: an arm has zero total weight");
  m1 /= s1;
  m0 /= s0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inf = data[i].a ? w[i] * (y[i] - m1) / s1 : -w[i] * (y[i] - m0) / s0;
    ss += inf * inf;
  }
  AteResult res;
  res.method = "ipw";
  res.n = n;
  res.theta_hat = m1 - m0;
  res.se_model = std::sqrt(ss);
  res.trim_event_count = events;
  res.provenance = b.provenance();
  return res;
}

template <class Nu>
AteResult full_data_ate(const std::vector<FullRecord>& full, Nu&& nu) {
  if (full.size() < 2) throw DomainError("full_data_ate needs at least two records");
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const double v = nu(full[i].t1) - nu(full[i].t0);
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  const double n = static_cast<double>(full.size());
  AteResult res;
  res.method = "full_data";
  res.n = full.size();
  res.theta_hat = mean;
  res.se_model = std::sqrt(m2 / (n - 1.0) / n);
  return res;
}

struct BootstrapResult {
  double se = 0.0;
  std::size_t replicates = 0;  // successful resamples
  std::size_t failures = 0;
  bool low_replicates = false;  // fewer than 50 successful resamples
};

// Nonparametric bootstrap of a whole estimation pipeline. Resample b draws
// indices from a stream keyed by (seed, b); failed resamples are skipped and
// counted, and more than 10% failures is an error.
template <class Estimator>
BootstrapResult bootstrap_se(const Dataset& data, Estimator&& estimator, std::size_t b,
                             std::uint64_t seed, unsigned jobs = 1) {
  if (b < 2) throw ArgumentError("bootstrap needs at least 2 replicates");
  const std::size_t n = data.size();
  std::vector<double> est(b, 0.0);
  std::vector<char> ok(b, 0);
  parallel_for(b, jobs, [&](std::size_t r) {
    CounterRng rng(derive_key(seed, {0xB007, r}));
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    try {
      est[r] = estimator(data.subset(idx), derive_key(seed, {0xB008, r}));
      ok[r] = std::isfinite(est[r]);
    } catch (const Error&) {
      ok[r] = 0;
    }
  });
  BootstrapResult res;
  double s = 0.0, ss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (!ok[r]) {
      ++res.failures;
      continue;
    }
    ++res.replicates;
    s += est[r];
  }
  if (static_cast<double>(res.failures) > 0.1 * static_cast<double>(b)) {
    throw DegenerateError("bootstrap: " + std::to_string(res.failures) + " of " +
                          std::to_string(b) + " resamples failed");
  }
  if (res.replicates < 2) throw DegenerateError("bootstrap: fewer than two successful resamples");
  const double m = s / static_cast<double>(res.replicates);
  for (std::size_t r = 0; r < b; ++r) {
    if (ok[r]) ss += (est[r] - m) * (est[r] - m);
  }
  res.se = std::sqrt(ss / static_cast<double>(res.replicates - 1));
  res.low_replicates = res.replicates < 50;
  return res;
}

}  // namespace ltrc

#endif  // LTRC_ATE_HPP
