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

// Simulation designs: the ATE design and the three CATE scenarios, their
// analytic nuisances and ground truths.
//
// Common structure per attempted draw i (a pure function of (seed, i)):
//   Z ~ U(-1, 1)^2, A ~ Bernoulli(expit(z1 - z2)),
//   tau2 - Q(a) is proportional hazards with a Uniform(0, tau2) baseline,
//   so G(t) = (t / tau2)^exp(lpQ) and Q = tau2 * U^(1 / exp(lpQ)),
//   D(a) ~ exponential with mean exp(1.5 - 0.3a - 0.1z1 - 0.2z2).
// A draw is observed when Q < T(A).

#ifndef LTRC_SIM_HPP
#define LTRC_SIM_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/nuisance.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {

enum class ScenarioKind { kAte, kCateI, kCateII, kCateIII };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kAte;
  double tau1 = 1.0;  // location shift of T in the ATE design
  double tau2 = 5.0;  // truncation pivot
  // Drops every treatment coefficient, giving identical arms.
  bool null_treatment = false;

  // ATE event time: Weibull(1.5) with log-hazard -2 + 0.4a + 0.2z1 + 0.3z2.
  static constexpr double kWeibullShape = 1.5;
  // CATE noise: Weibull(2, 0.04), centered by its mean 0.04 * Gamma(1.5).
  static constexpr double kNoiseShape = 2.0;
  static constexpr double kNoiseScale = 0.04;

  static ScenarioSpec ate() { return {}; }

  static ScenarioSpec parse(const std::string& tag) {
    ScenarioSpec s;
    if (tag == "ate") return s;
    if (tag == "i" || tag == "cate_i") s.kind = ScenarioKind::kCateI;
    else if (tag == "ii" || tag == "cate_ii") s.kind = ScenarioKind::kCateII;
    else if (tag == "iii" || tag == "cate_iii") s.kind = ScenarioKind::kCateIII;
    else throw ArgumentError("unknown scenario tag: " + tag);
    return s;
  }

  std::string name() const {
    switch (kind) {
      case ScenarioKind::kAte: return "ate";
      case ScenarioKind::kCateI: return "cate_i";
      case ScenarioKind::kCateII: return "cate_ii";
      case ScenarioKind::kCateIII: return "cate_iii";
    }
    return "";
  }

  bool is_cate() const { return kind != ScenarioKind::kAte; }

  double a_coef(double c) const { return null_treatment ? 0.0 : c; }

  static double noise_mean() { return kNoiseScale * std::tgamma(1.0 + 1.0 / kNoiseShape); }

  double propensity(double z1, double z2) const { return expit(z1 - z2); }

  // ATE: log-hazard of T - tau1.
  double lp_event(int a, double z1, double z2) const {
    return -2.0 + a_coef(0.4) * a + 0.2 * z1 + 0.3 * z2;
  }

  // CATE: location of log T(a).
  double log_location(int a, double z1, double z2) const {
    const double b = a_coef(1.0) * a;
    switch (kind) {
      case ScenarioKind::kCateI:
        return 0.8 + 0.2 * b - 0.2 * b * z1 + 0.2 * std::sqrt(std::abs(z2));
      case ScenarioKind::kCateII: {
        const double m = 0.5 * (z1 + z2);
        return 0.8 + 0.2 * b - 0.2 * b * m * m + 0.2 * z2;
      }
      case ScenarioKind::kCateIII:
        return 0.8 + 0.2 * b - 0.2 * b * std::sin(std::numbers::pi * z1) +
               0.2 * b * std::sqrt(std::abs(z2));
      case ScenarioKind::kAte:
        break;
    }
    throw ArgumentError("log_location: not a CATE scenario");
  }

  double lp_truncation(int a, double z1, double z2) const {
    if (is_cate()) return -0.6 + 0.4 * z1 + a_coef(0.5) * a * z2;
    return -0.6 + a_coef(0.6) * a + 0.4 * z1 + 0.2 * z2;
  }

  double censoring_mean(int a, double z1, double z2) const {
    return std::exp(1.5 - a_coef(0.3) * a - 0.1 * z1 - 0.2 * z2);
  }

  // P(T(a) <= t | z).
  double event_cdf(double t, int a, double z1, double z2) const {
    if (!is_cate()) {
      if (t <= tau1) return 0.0;
      return -std::expm1(-std::pow(t - tau1, kWeibullShape) * std::exp(lp_event(a, z1, z2)));
    }
    if (t <= 0.0) return 0.0;
    const double e = std::log(t) - log_location(a, z1, z2) + noise_mean();
    if (e <= 0.0) return 0.0;
    return -std::expm1(-std::pow(e / kNoiseScale, kNoiseShape));
  }

  double event_quantile(double p, int a, double z1, double z2) const {
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    const double h = -std::log1p(-p);
    if (!is_cate()) return tau1 + std::pow(h * std::exp(-lp_event(a, z1, z2)), 1.0 / kWeibullShape);
    return std::exp(log_location(a, z1, z2) - noise_mean() +
                    kNoiseScale * std::pow(h, 1.0 / kNoiseShape));
  }

  // One draw of T(a) given z.
  double draw_event(int a, double z1, double z2, CounterRng& rng) const {
    if (is_cate()) {
      return std::exp(log_location(a, z1, z2) + rng.weibull(kNoiseShape, kNoiseScale) - noise_mean());
    }
    return tau1 + rng.weibull(kWeibullShape, std::exp(-lp_event(a, z1, z2) / kWeibullShape));
  }

  double truncation_cdf(double t, int a, double z1, double z2) const {
    if (t <= 0.0) return 0.0;
    if (t >= tau2) return 1.0;
    return std::pow(t / tau2, std::exp(lp_truncation(a, z1, z2)));
  }

  double truncation_quantile(double p, int a, double z1, double z2) const {
    return tau2 * std::pow(p, 1.0 / std::exp(lp_truncation(a, z1, z2)));
  }

  double censoring_survival(double u, int a, double z1, double z2) const {
    return u <= 0.0 ? 1.0 : std::exp(-u / censoring_mean(a, z1, z2));
  }

  // Level p of P(D <= u).
  double censoring_quantile(double p, int a, double z1, double z2) const {
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -censoring_mean(a, z1, z2) * std::log1p(-p);
  }
};

// Analytic CATE, mean of log T(1) - log T(0) given z.
inline double true_tau(const ScenarioSpec& s, double z1, double z2) {
  switch (s.kind) {
    case ScenarioKind::kCateI:
      return 0.2 - 0.2 * z1;
    case ScenarioKind::kCateII: {
      const double m = 0.5 * (z1 + z2);
      return 0.2 - 0.2 * m * m;
    }
    case ScenarioKind::kCateIII:
      return 0.2 - 0.2 * std::sin(std::numbers::pi * z1) + 0.2 * std::sqrt(std::abs(z2));
    case ScenarioKind::kAte:
      break;
  }
  throw ArgumentError("true_tau: scenario has no CATE");
}

struct Draw {
  FullRecord full;
  bool observed = false;
  ObservedRecord record;  // meaningful only when observed
};

// Attempted draw i; independent of every other index.
inline Draw draw_subject(const ScenarioSpec& s, std::uint64_t seed, std::uint64_t i) {
  CounterRng rng(derive_key(seed, {0x51A, i}));
  Draw d;
  const double z1 = rng.uniform(-1.0, 1.0);
  const double z2 = rng.uniform(-1.0, 1.0);
  const int a = rng.bernoulli(s.propensity(z1, z2)) ? 1 : 0;
  d.full.t1 = s.draw_event(1, z1, z2, rng);
  d.full.t0 = s.draw_event(0, z1, z2, rng);
  d.full.q = s.tau2 * std::pow(rng.uniform(), 1.0 / std::exp(s.lp_truncation(a, z1, z2)));
  d.full.d = -s.censoring_mean(a, z1, z2) * std::log(rng.uniform());
  d.full.a = a;
  d.full.z = {z1, z2};
  const double t = a ? d.full.t1 : d.full.t0;
  d.observed = d.full.q < t;
  if (d.observed) {
    const double c = d.full.q + d.full.d;
    d.record = {d.full.q, std::min(t, c), t <= c ? 1 : 0, a, d.full.z};
  }
  return d;
}

struct SimSample {
  std::vector<FullRecord> full;  // every attempted draw
  Dataset observed;
  std::vector<std::uint64_t> draw_index;  // attempt index of each observed record
};

// Rejection sampling until n_observed draws satisfy Q < T.
inline SimSample generate(const ScenarioSpec& s, std::size_t n_observed, std::uint64_t seed,
                          bool keep_full = true) {
  if (n_observed == 0) throw ArgumentError("generate: n_observed must be >= 1");
  SimSample out;
  out.observed.p = 2;
  out.observed.records.reserve(n_observed);
  for (std::uint64_t i = 0; out.observed.size() < n_observed; ++i) {
    Draw d = draw_subject(s, seed, i);
    if (d.observed) {
      out.observed.records.push_back(std::move(d.record));
      out.draw_index.push_back(i);
    }
    if (keep_full) out.full.push_back(std::move(d.full));
  }
  return out;
}

inline SimSample gen_ate_sample(std::size_t n, std::uint64_t seed) {
  return generate(ScenarioSpec::ate(), n, seed);
}

inline SimSample gen_cate_sample(std::size_t n, const std::string& scenario, std::uint64_t seed) {
  const ScenarioSpec s = ScenarioSpec::parse(scenario);
  if (!s.is_cate()) throw ArgumentError("gen_cate_sample: scenario must be i, ii or iii");
  return generate(s, n, seed);
}

// E{nu(T(1))} - E{nu(T(0))} over the untruncated population.
template <class Nu>
double mc_true_theta(const ScenarioSpec& s, Nu&& nu, std::size_t n_mc, std::uint64_t seed,
                     double* standard_error = nullptr) {
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Draw d = draw_subject(s, seed, i);
    const double v = nu(d.full.t1) - nu(d.full.t0);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  if (standard_error) *standard_error = std::sqrt(m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc));
  return mean;
}

// True (pi, F, G, S_D); distributions are tabulated on a quantile grid.
inline NuisanceBundle true_bundle(const ScenarioSpec& s, double trim_floor, int grid_size = 2000) {
  const auto levels = AnalyticLaw::default_levels(grid_size, 7);
  const std::string tag = "true:" + s.name();
  NuisanceBundle b;
  b.trim_floor = trim_floor;
  b.scheme = "a";
  b.pi = PropensityModel::analytic([s](const Subject& x) { return s.propensity(x.z[0], x.z[1]); },
                                   tag);
  b.f = ConditionalDistribution::analytic(
      DistributionKind::kCdfF,
      {[s](double t, const Subject& x) { return s.event_cdf(t, x.a, x.z[0], x.z[1]); },
       [s](double p, const Subject& x) { return s.event_quantile(p, x.a, x.z[0], x.z[1]); }, levels},
      tag);
  b.g = ConditionalDistribution::analytic(
      DistributionKind::kCdfG,
      {[s](double t, const Subject& x) { return s.truncation_cdf(t, x.a, x.z[0], x.z[1]); },
       [s](double p, const Subject& x) { return s.truncation_quantile(p, x.a, x.z[0], x.z[1]); }, levels},
      tag);
  b.sd = ConditionalDistribution::analytic(
      DistributionKind::kSurvivalSD,
      {[s](double u, const Subject& x) { return s.censoring_survival(u, x.a, x.z[0], x.z[1]); },
       [s](double p, const Subject& x) { return s.censoring_quantile(p, x.a, x.z[0], x.z[1]); }, levels},
      tag);
  return b;
}

}  // namespace ltrc

#endif  // LTRC_SIM_HPP
