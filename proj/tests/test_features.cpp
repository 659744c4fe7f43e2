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

#include "ltrc/features.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {
namespace {

struct Pool {
  std::vector<std::vector<double>> z;
  std::vector<Subject> subjects;
};

Pool make_pool(std::size_t n, std::uint64_t seed) {
  Pool p;
  CounterRng rng(derive_key(seed, {3}));
  p.z.resize(n);
  for (auto& z : p.z) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    p.subjects.push_back({rng.uniform(0, 5), static_cast<int>(i % 2), p.z[i]});
  }
  return p;
}

TEST(Features, IdentityPrependsTreatment) {
  const std::vector<double> z{0.3, -0.2};
  const Subject s{0.0, 1, z};
  const auto f = expand_features(s, FeatureSpec::identity(2), {});
  EXPECT_EQ(f, (std::vector<double>{1.0, 0.3, -0.2}));
}

TEST(Features, SplineCountTwoContinuousOneBinary) {
  const auto pool = make_pool(300, 1);
  const auto spec = FeatureSpec::spline({VarRef::parse("z1"), VarRef::parse("z2"), VarRef::parse("a")});
  const auto m = FeatureMap::fit(spec, pool.subjects);
  EXPECT_EQ(m.dim(), 134u);
  EXPECT_EQ(m.names().size(), 134u);
}

TEST(Features, SplineCountThreeContinuousOneBinary) {
  const auto pool = make_pool(300, 2);
  const auto spec = FeatureSpec::spline(
      {VarRef::parse("z1"), VarRef::parse("z2"), VarRef::parse("q"), VarRef::parse("a")});
  const auto m = FeatureMap::fit(spec, pool.subjects);
  EXPECT_EQ(m.dim(), 274u);
  EXPECT_EQ(m.apply(pool.subjects[0]).size(), 274u);
}

TEST(Features, SplineDfBelowThreeRejected) {
  EXPECT_THROW(FeatureSpec::spline({VarRef::parse("z1")}, 2), ArgumentError);
}

TEST(Features, NaturalSplineIsLinearBeyondBoundaryKnots) {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(i / 100.0);
  const auto b = NaturalSplineBasis::from_data(v, 7);
  // Second differences vanish outside [min, max].
  for (double x0 : {1.5, 3.0, -2.0}) {
    std::vector<double> lo(7), mid(7), hi(7);
    b.evaluate(x0 - 0.1, lo.data());
    b.evaluate(x0, mid.data());
    b.evaluate(x0 + 0.1, hi.data());
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(lo[k] - 2 * mid[k] + hi[k], 0.0, 1e-10);
  }
}

TEST(Features, TermLanguage) {
  const std::vector<double> z{0.5, -2.0};
  const Subject s{4.0, 1, z};
  const auto spec = FeatureSpec::from_terms({"a*z1", "z2^2", "q", "a:z2"}, true);
  const auto f = expand_features(s, spec, {});
  EXPECT_EQ(f, (std::vector<double>{1.0, 0.5, 4.0, 4.0, -2.0}));
  EXPECT_THROW(Term::parse("w1"), SchemaError);
}

}  // namespace
}  // namespace ltrc
