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

#include <algorithm>
#include <cmath>

#include "ltrc/sim.hpp"
#include "support/unbiasedness_oracle.hpp"

namespace ltrc {
namespace {

struct Rates {
  double truncation, treated, censoring;
};

Rates rates_of(const ScenarioSpec& s, std::size_t n, std::uint64_t seed) {
  const SimSample smp = generate(s, n, seed);
  double a = 0.0, c = 0.0;
  for (const auto& r : smp.observed.records) {
    a += r.a;
    c += 1 - r.delta;
  }
  const double nn = static_cast<double>(n);
  return {1.0 - nn / static_cast<double>(smp.full.size()), a / nn, c / nn};
}

// Rates of the generators from an independent 4e6-draw numpy simulation;
// the published truncation and censoring figures differ.
TEST(Generate, AteRates) {
  const Rates r = rates_of(ScenarioSpec::ate(), 100000, 1);
  EXPECT_NEAR(r.truncation, 0.2566, 0.01);
  EXPECT_NEAR(r.treated, 0.439, 0.01);
  EXPECT_NEAR(r.censoring, 0.4620, 0.01);
}

TEST(Generate, CateRates) {
  const double trunc[] = {0.2776, 0.3206, 0.3004};
  const double cens[] = {0.3659, 0.3278, 0.3537};
  const char* tags[] = {"i", "ii", "iii"};
  for (int k = 0; k < 3; ++k) {
    const Rates r = rates_of(ScenarioSpec::parse(tags[k]), 50000, 2);
    EXPECT_NEAR(r.truncation, trunc[k], 0.015) << tags[k];
    EXPECT_NEAR(r.censoring, cens[k], 0.015) << tags[k];
  }
  EXPECT_THROW(ScenarioSpec::parse("iv"), ArgumentError);
  EXPECT_THROW(gen_cate_sample(10, "ate", 1), ArgumentError);
}

TEST(Generate, RecordsArePureFunctionsOfSeedAndIndex) {
  const ScenarioSpec s = ScenarioSpec::parse("ii");
  const SimSample smp = generate(s, 300, 42);
  for (std::size_t i = 0; i < smp.observed.size(); i += 37) {
    const Draw d = draw_subject(s, 42, smp.draw_index[i]);
    ASSERT_TRUE(d.observed);
    EXPECT_EQ(d.record, smp.observed[i]);
  }
  EXPECT_EQ(generate(s, 300, 42).observed, smp.observed);
  EXPECT_NE(generate(s, 300, 43).observed, smp.observed);
  for (const auto& r : smp.observed.records) {
    EXPECT_LT(r.q, r.x);
  }
}

TEST(Generate, TruncationInversionMatchesUniformBaselinePh) {
  // Probability integral transform of Q through G0(. | a, z) must be uniform.
  const ScenarioSpec s = ScenarioSpec::ate();
  std::vector<double> u;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const Draw d = draw_subject(s, 9, i);
    u.push_back(s.truncation_cdf(d.full.q, d.full.a, d.full.z[0], d.full.z[1]));
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    ks = std::max({ks, std::abs(u[i] - i / n), std::abs(u[i] - (i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(Generate, CateNoiseIsCentered) {
  const ScenarioSpec s = ScenarioSpec::parse("i");
  const double sigma = 0.04 * std::sqrt(1.0 - std::pow(std::tgamma(1.5), 2));
  double sum = 0.0;
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_key(5, {i}));
    sum += std::log(s.draw_event(1, 0.1, -0.4, rng)) - s.log_location(1, 0.1, -0.4);
  }
  EXPECT_LT(std::abs(sum / n), 3.0 * sigma / 1000.0);
}

TEST(Generate, ScenarioOneEncodesItsEffect) {
  const ScenarioSpec s = ScenarioSpec::parse("i");
  const std::size_t n = 1000000;
  double sum = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_key(6, {i}));
    const double d = std::log(s.draw_event(1, 0.5, 0.3, rng)) - std::log(s.draw_event(0, 0.5, 0.3, rng));
    sum += d;
    ss += d * d;
  }
  const double m = sum / n;
  const double se = std::sqrt((ss / n - m * m) / n);
  EXPECT_NEAR(m, 0.10, 4.0 * se);
}

TEST(TrueTau, ClosedFormulas) {
  EXPECT_NEAR(true_tau(ScenarioSpec::parse("i"), 1.0, 0.3), 0.0, 1e-15);
  EXPECT_NEAR(true_tau(ScenarioSpec::parse("ii"), 0.0, 0.0), 0.2, 1e-15);
  EXPECT_NEAR(true_tau(ScenarioSpec::parse("iii"), 0.5, 0.25), 0.1, 1e-15);
  EXPECT_THROW(true_tau(ScenarioSpec::ate(), 0.0, 0.0), ArgumentError);
}

TEST(TrueLaws, QuantilesInvertCdfs) {
  for (const char* tag : {"ate", "i", "iii"}) {
    const ScenarioSpec s = ScenarioSpec::parse(tag);
    for (double p : {0.01, 0.3, 0.77, 0.999}) {
      EXPECT_NEAR(s.event_cdf(s.event_quantile(p, 1, 0.2, -0.5), 1, 0.2, -0.5), p, 1e-12);
      EXPECT_NEAR(s.truncation_cdf(s.truncation_quantile(p, 0, 0.2, -0.5), 0, 0.2, -0.5), p, 1e-12);
      EXPECT_NEAR(1.0 - s.censoring_survival(s.censoring_quantile(p, 1, 0.2, -0.5), 1, 0.2, -0.5), p, 1e-12);
    }
  }
}

TEST(McTrueTheta, ReferenceValue) {
  double se = 0.0;
  const double theta = mc_true_theta(ScenarioSpec::ate(), Transform::survival_indicator(3.0), 10000000, 1, &se);
  EXPECT_NEAR(theta, -0.1163, 0.001);
  EXPECT_LT(se, 0.0003);
}

TEST(McTrueTheta, NullEffectAndSeedIndependence) {
  ScenarioSpec null = ScenarioSpec::ate();
  null.null_treatment = true;
  const Transform nu = Transform::survival_indicator(3.0);
  double se0 = 0.0;
  const double theta0 = mc_true_theta(null, nu, 1000000, 3, &se0);
  EXPECT_GT(se0, 0.0);
  EXPECT_NEAR(theta0, 0.0, 4.0 * se0);
  double se1 = 0.0, se2 = 0.0;
  const double a = mc_true_theta(ScenarioSpec::ate(), nu, 1000000, 11, &se1);
  const double b = mc_true_theta(ScenarioSpec::ate(), nu, 1000000, 12, &se2);
  EXPECT_LT(std::abs(a - b), 6.0 * std::hypot(se1, se2));
}

// Reduced-size unbiasedness oracle for V; the acceptance binary runs it
// at N = 1e5.
TEST(UnbiasednessOracle, TrueAndOneSideWrongNuisancesAreUnbiased) {
  using namespace testing;
  const ScenarioSpec s = ScenarioSpec::ate();
  const Transform nu = Transform::survival_indicator(3.0);
  const RecordWeight one = [](int, double, double) { return 1.0; };
  const RecordWeight f = [](int a, double z1, double) { return 1.0 + a + z1 * z1; };
  const Dataset data = generate(s, 20000, 77, false).observed;
  const MeanSe t_nu = full_data_target(s, nu, one, 1000000, 78);
  const MeanSe t_one = full_data_target(s, [](double) { return 1.0; }, one, 1000000, 78);
  const MeanSe t_f = full_data_target(s, [](double) { return 1.0; }, f, 1000000, 78);
  const BundleChoice choices[] = {{true, true, true}, {false, true, true}, {true, false, false}};
  for (const BundleChoice& c : choices) {
    const NuisanceBundle b = oracle_bundle(s, c, 1e-4, 400);
    const ObservedMeans m = observed_means(data, b, nu, f);
    const UnbiasednessCheck v_nu{m.v_nu, t_nu};
    const UnbiasednessCheck v_one{m.v_one, t_one};
    const UnbiasednessCheck v_f{m.v_one_f, t_f};
    EXPECT_LT(std::abs(v_nu.z_score()), 3.0) << c.f_true << c.g_true;
    EXPECT_LT(std::abs(v_one.z_score()), 3.0) << c.f_true << c.g_true;
    EXPECT_LT(std::abs(v_f.z_score()), 3.0) << c.f_true << c.g_true;
  }
}

}  // namespace
}  // namespace ltrc
