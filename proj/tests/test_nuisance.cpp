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

#include <cmath>

#include "ltrc/nuisance.hpp"
#include "ltrc/sim.hpp"

namespace ltrc {
namespace {

using Model = NuisanceSpec::Model;

const Dataset& ate_data_20000() {
  static const Dataset d = gen_ate_sample(20000, 2024).observed;
  return d;
}

// Coefficient within three standard errors of the generator value.
void expect_recovered(const CoxModel& m, const std::vector<double>& truth) {
  const Eigen::VectorXd se = m.standard_errors();
  ASSERT_EQ(static_cast<std::size_t>(m.beta.size()), truth.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    EXPECT_LT(std::abs(m.beta[i] - truth[j]), 3.0 * se[i])
        << "coef " << j << " beta " << m.beta[i] << " se " << se[i];
  }
}

Dataset constant_covariate_data() {
  Dataset d;
  d.p = 2;
  CounterRng rng(4);
  for (int i = 0; i < 60; ++i) {
    const double q = rng.uniform(0.0, 2.0);
    d.records.push_back({q, q + rng.uniform(0.1, 3.0), rng.bernoulli(0.7) ? 1 : 0, 0, {0.0, 0.0}});
  }
  return d;
}

void expect_valid_distribution(const ConditionalDistribution& d, const Dataset& data) {
  CounterRng rng(99);
  const bool survival = d.kind() == DistributionKind::kSurvivalSD;
  for (int i = 0; i < 1000; ++i) {
    const auto& r = data[rng.below(data.size())];
    const Subject s{r.q, r.a, r.z};
    const double t1 = rng.uniform(0.0, 8.0), t2 = t1 + rng.uniform(0.0, 3.0);
    const double v1 = d.at(t1, s), v2 = d.at(t2, s);
    ASSERT_GE(v1, 0.0);
    ASSERT_LE(v1, 1.0);
    if (survival) {
      ASSERT_GE(v1, v2);
    } else {
      ASSERT_LE(v1, v2);
    }
  }
}

TEST(FitF, ZeroCoefficientsGiveNelsonAalen) {
  const Dataset d = constant_covariate_data();
  const auto f = fit_event_cdf_F(d, NuisanceSpec::of(Model::kCox));
  EXPECT_EQ(f.cox_model()->beta.norm(), 0.0);
  // Brute-force Nelson-Aalen with risk set q < t <= x.
  std::vector<double> times;
  for (const auto& r : d.records) if (r.delta) times.push_back(r.x);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const std::vector<double> z0{0.0, 0.0}, z1{0.7, -0.2};
  const StepFunction a = f.evaluate({1.0, 0, z0});
  const StepFunction b = f.evaluate({0.3, 1, z1});
  double cum = 0.0;
  for (double t : times) {
    double events = 0, risk = 0;
    for (const auto& r : d.records) {
      events += r.delta && r.x == t;
      risk += r.q < t && t <= r.x;
    }
    cum += events / risk;
    EXPECT_NEAR(a(t), 1.0 - std::exp(-cum), 1e-12);
    EXPECT_NEAR(b(t), a(t), 1e-15);
  }
  EXPECT_EQ(a(times.front() * 0.999), 0.0);
}

TEST(FitF, RecoversGeneratorCoefficients) {
  const auto f = fit_event_cdf_F(ate_data_20000(), NuisanceSpec::of(Model::kCox));
  expect_recovered(*f.cox_model(), {0.4, 0.2, 0.3});
  expect_valid_distribution(f, ate_data_20000());
}

TEST(FitF, MatchesTrueCdfAtThree) {
  const Dataset d = gen_ate_sample(5000, 31).observed;
  const auto f = fit_event_cdf_F(d, NuisanceSpec::of(Model::kCox));
  const ScenarioSpec s = ScenarioSpec::ate();
  CounterRng rng(5);
  double gap = 0.0;
  const int m = 500;
  for (int i = 0; i < m; ++i) {
    const std::vector<double> z{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    gap += f.at(3.0, {0.0, 1, z}) - s.event_cdf(3.0, 1, z[0], z[1]);
  }
  EXPECT_LT(std::abs(gap / m), 0.02);
}

TEST(FitSD, SingleBreslowStep) {
  Dataset d;
  d.p = 1;
  for (int i = 0; i < 5; ++i) d.records.push_back({0.5 * i, 0.5 * i + 2.0, 0, 1, {0.25}});
  const auto sd = fit_residual_censoring_S(d, NuisanceSpec::of(Model::kCox));
  const StepFunction s = sd.evaluate({0.0, 1, std::vector<double>{0.25}});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s.times[0], 2.0);
  EXPECT_NEAR(s.values[0], std::exp(-1.0), 1e-15);
  EXPECT_EQ(s(0.0), 1.0);
}

TEST(FitSD, RecoversHazardCoefficientsAndRejectsNoCensoring) {
  // D has mean exp(1.5 - 0.3a - 0.1z1 - 0.2z2): hazard coefficients carry the opposite sign.
  const auto sd = fit_residual_censoring_S(ate_data_20000(), NuisanceSpec::of(Model::kCox));
  expect_recovered(*sd.cox_model(), {0.3, 0.1, 0.2, 0.0});
  expect_valid_distribution(sd, ate_data_20000());
  const std::vector<double> z{0.1, 0.2};
  EXPECT_EQ(sd.at(0.0, {1.0, 1, z}), 1.0);

  Dataset all_events = constant_covariate_data();
  for (auto& r : all_events.records) r.delta = 1;
  EXPECT_THROW(fit_residual_censoring_S(all_events, NuisanceSpec::of(Model::kCox)), DegenerateError);
}

TEST(FitG, ReachesOneAndTracksTruth) {
  const Dataset& d = ate_data_20000();
  const auto sd = fit_residual_censoring_S(d, NuisanceSpec::of(Model::kCox));
  const auto g = fit_truncation_cdf_G(d, sd, NuisanceSpec::of(Model::kCox), 0.1);
  expect_valid_distribution(g, d);
  double qmax = 0.0;
  for (const auto& r : d.records) qmax = std::max(qmax, r.q);
  const ScenarioSpec s = ScenarioSpec::ate();
  CounterRng rng(8);
  double gap = 0.0;
  const int m = 200;
  for (int i = 0; i < m; ++i) {
    const int a = rng.bernoulli(0.5) ? 1 : 0;
    const std::vector<double> z{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const StepFunction sg = g.evaluate({0.0, a, z});
    EXPECT_EQ(sg(qmax), 1.0);
    EXPECT_EQ(sg(qmax + 3.0), 1.0);
    const double t1 = rng.uniform(0.0, 5.0), t2 = rng.uniform(0.0, 5.0);
    EXPECT_EQ(sg(std::min(t1, t2)) <= sg(std::max(t1, t2)), true);
    gap += std::abs(sg(2.0) - s.truncation_cdf(2.0, a, z[0], z[1]));
  }
  EXPECT_LT(gap / m, 0.03);

  Dataset censored = constant_covariate_data();
  for (auto& r : censored.records) r.delta = 0;
  EXPECT_THROW(fit_truncation_cdf_G(censored, sd, NuisanceSpec::of(Model::kCox), 0.1), DegenerateError);
}

TEST(FitPropensity, BalancedDesignGivesSampleMean) {
  Dataset d;
  d.p = 2;
  const double cells[4][2] = {{-0.5, -0.5}, {0.5, -0.5}, {-0.5, 0.5}, {0.5, 0.5}};
  for (const auto& c : cells) {
    for (int k = 0; k < 5; ++k) d.records.push_back({0.1, 1.0 + k, 1, k < 2 ? 1 : 0, {c[0], c[1]}});
  }
  const std::vector<double> w(d.size(), 1.0);
  const auto pi = fit_propensity_weighted(d, w, NuisanceSpec::of(Model::kLogistic), 0, "test");
  for (const auto& c : cells) {
    EXPECT_NEAR(pi.predict({0.0, 0, std::vector<double>{c[0], c[1]}}), 0.4, 1e-10);
  }
}

TEST(FitPropensity, WeightedFitRecoversGeneratorCoefficients) {
  const Dataset& d = ate_data_20000();
  const auto sd = fit_residual_censoring_S(d, NuisanceSpec::of(Model::kCox));
  const auto g = fit_truncation_cdf_G(d, sd, NuisanceSpec::of(Model::kCox), 0.1);
  const auto w = propensity_weights(d, g, sd, 0.1);
  std::vector<double> y;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), 3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) << 1.0, d[i].z[0], d[i].z[1];
    y.push_back(d[i].a);
  }
  const LogisticFit fit = fit_logistic(x, y, w, {});
  const Eigen::VectorXd se = fit.covariance_sandwich.diagonal().cwiseSqrt();
  EXPECT_LT(std::abs(fit.beta[1] - 1.0), 3.0 * se[1]);
  EXPECT_LT(std::abs(fit.beta[2] + 1.0), 3.0 * se[2]);

  const auto pi = fit_propensity(d, g, sd, NuisanceSpec::of(Model::kLogistic), 0.1);
  for (std::size_t i = 0; i < d.size(); i += 97) {
    const double p = pi.predict({d[i].q, d[i].a, d[i].z});
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    const Eigen::VectorXd row = x.row(static_cast<Eigen::Index>(i)).transpose();
    EXPECT_NEAR(p, fit.predict(row.data()), 1e-9);
  }
}

TEST(FitPropensity, WeightingRemovesTruncationBias) {
  int closer = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d = gen_ate_sample(5000, 1000 + static_cast<std::uint64_t>(rep)).observed;
    const auto sd = fit_residual_censoring_S(d, NuisanceSpec::of(Model::kCox));
    const auto g = fit_truncation_cdf_G(d, sd, NuisanceSpec::of(Model::kCox), 0.1);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), 3);
    std::vector<double> y;
    for (std::size_t i = 0; i < d.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) << 1.0, d[i].z[0], d[i].z[1];
      y.push_back(d[i].a);
    }
    const auto weighted = fit_logistic(x, y, propensity_weights(d, g, sd, 0.1), {});
    const auto naive = fit_logistic(x, y, std::vector<double>(d.size(), 1.0), {});
    // Generator coefficients are (0, 1, -1) including the intercept.
    auto dist = [](const LogisticFit& f) { return std::hypot(f.beta[0], f.beta[1] - 1.0, f.beta[2] + 1.0); };
    closer += dist(weighted) < dist(naive);
  }
  EXPECT_GE(closer, 90);
}

TEST(SchemeA, CorrectAndMisspecifiedConfigsFit) {
  const Dataset d = gen_ate_sample(1000, 5).observed;
  SchemeConfig cfg;
  const NuisanceBundle b = fit_scheme_a(d, cfg, 3);
  expect_valid_distribution(b.f, d);
  expect_valid_distribution(b.g, d);
  expect_valid_distribution(b.sd, d);
  EXPECT_EQ(cfg.label(), "Cox1/lgs1-Cox1-Cox1");
  EXPECT_EQ(b.provenance()["F"], "F:Cox1");

  cfg.f = NuisanceSpec::of(Model::kCoxMisspec);
  cfg.pi = NuisanceSpec::of(Model::kLogisticMisspec);
  const NuisanceBundle w = fit_scheme_a(d, cfg, 3);
  EXPECT_EQ(w.f.cox_model()->beta.size(), 2);
  EXPECT_EQ(cfg.label(), "Cox2/lgs2-Cox1-Cox1");
}

TEST(SchemeA, FIsIndependentOfTheWeightingFits) {
  const Dataset d = gen_ate_sample(800, 6).observed;
  const NuisanceBundle b = fit_scheme_a(d, SchemeConfig{}, 3);
  const auto f_alone = fit_event_cdf_F(d, NuisanceSpec::of(Model::kCox), derive_key(3, {4}));
  EXPECT_EQ(f_alone.cox_model()->beta, b.f.cox_model()->beta);
  EXPECT_EQ(f_alone.cox_model()->baseline_hazard_increments, b.f.cox_model()->baseline_hazard_increments);
}

TEST(SchemeA, FlexibleConfigIsDeterministic) {
  const Dataset d = gen_ate_sample(300, 7).observed;
  SchemeConfig cfg;
  cfg.f = NuisanceSpec::of(Model::kPCox);
  cfg.pi = NuisanceSpec::of(Model::kGbm);
  cfg.pi.boost.n_trees = 100;
  const NuisanceBundle a = fit_scheme_a(d, cfg, 11);
  const NuisanceBundle b = fit_scheme_a(d, cfg, 11);
  EXPECT_EQ(a.f.cox_model()->beta, b.f.cox_model()->beta);
  EXPECT_EQ(a.f.cox_model()->beta.size(), 134);
  EXPECT_GT(a.f.cox_model()->ridge_lambda, 0.0);
  for (std::size_t i = 0; i < d.size(); i += 13) {
    const Subject s{d[i].q, d[i].a, d[i].z};
    EXPECT_EQ(a.pi.predict(s), b.pi.predict(s));
    EXPECT_GT(a.pi.predict(s), 0.0);
    EXPECT_LT(a.pi.predict(s), 1.0);
  }
}

TEST(NuisanceSpec, JsonRoundTripAndUnknownKeys) {
  SchemeConfig cfg;
  cfg.g = NuisanceSpec::of(Model::kCoxMisspec);
  cfg.trim_floor = 0.05;
  const SchemeConfig back = SchemeConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.label(), cfg.label());
  EXPECT_EQ(back.trim_floor, 0.05);
  EXPECT_THROW(SchemeConfig::from_json({{"F", "Cox1"}, {"H", "Cox1"}}), SchemaError);
  EXPECT_THROW(NuisanceSpec::from_json("Cox9"), SchemaError);
}

}  // namespace
}  // namespace ltrc
