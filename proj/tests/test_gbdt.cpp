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

#include "ltrc/gbdt.hpp"

namespace ltrc {
namespace {

BoostData step_data(std::size_t n, std::uint64_t seed) {
  BoostData d;
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  CounterRng rng(derive_key(seed, {7}));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    d.x(k, 0) = rng.uniform(-1, 1);
    d.x(k, 1) = rng.uniform(-1, 1);
    d.y.push_back((d.x(k, 0) > 0.2 ? 1.0 : -0.5) + 0.1 * rng.uniform(-1, 1));
    d.weight.push_back(1.0);
    d.multiplier.push_back(1.0);
  }
  return d;
}

TEST(Boost, TrainingLossNonincreasingPerRound) {
  const auto d = step_data(400, 1);
  for (double sub : {1.0, 0.5}) {
    BoostParams p;
    p.n_trees = 60;
    p.max_depth = 2;
    p.subsample = sub;
    std::vector<double> trace;
    fit_boosted(d, BoostLoss::kWeightedSquared, p, 3, {&d, &trace});
    for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_LE(trace[r], trace[r - 1] + 1e-12);
    EXPECT_LT(trace.back(), 0.1 * trace.front());
  }
}

TEST(Boost, SingleLeafMatchesWeightedLeastSquares) {
  BoostData d = step_data(50, 2);
  CounterRng rng(derive_key(2, {8}));
  double num = 0, den = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d.weight[i] = rng.uniform(-0.6, 1.0);
    d.multiplier[i] = rng.uniform(-1, 1);
    num += d.weight[i] * d.multiplier[i] * d.y[i];
    den += d.weight[i] * d.multiplier[i] * d.multiplier[i];
  }
  ASSERT_GT(den, 0.0);
  BoostParams p;
  p.max_depth = 0;
  p.eta = 1.0;
  p.lambda = 1e-6;
  p.n_trees = 10;
  const auto m = fit_boosted(d, BoostLoss::kWeightedSquared, p, 1);
  EXPECT_NEAR(m.predict_raw(d.x.row(0)), num / den, 1e-10);
}

TEST(Boost, NegativeCurvatureLeafHasZeroValue) {
  BoostData d = step_data(30, 3);
  for (auto& w : d.weight) w = -1.0;
  BoostParams p;
  p.max_depth = 0;
  p.n_trees = 3;
  const auto m = fit_boosted(d, BoostLoss::kWeightedSquared, p, 1);
  EXPECT_EQ(m.predict_raw(d.x.row(0)), 0.0);
}

TEST(Boost, JsonRoundTripPreservesPredictions) {
  const auto d = step_data(200, 4);
  BoostParams p;
  p.n_trees = 20;
  p.max_depth = 3;
  p.colsample = 0.6;
  const auto m = fit_boosted(d, BoostLoss::kWeightedSquared, p, 9);
  const auto back = BoostedModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_EQ(back.predict_raw(d.x.row(i)), m.predict_raw(d.x.row(i)));
  }
}

TEST(Boost, DeterministicGivenSeed) {
  const auto d = step_data(200, 5);
  BoostParams p;
  p.n_trees = 15;
  p.subsample = 0.5;
  const auto a = fit_boosted(d, BoostLoss::kWeightedSquared, p, 11);
  const auto b = fit_boosted(d, BoostLoss::kWeightedSquared, p, 11);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Boost, LogisticSeparatesClasses) {
  BoostData d = step_data(400, 6);
  for (auto& y : d.y) y = y > 0 ? 1.0 : 0.0;
  BoostParams p;
  p.n_trees = 100;
  p.max_depth = 2;
  p.eta = 0.1;
  p.min_child_count = 10;
  const auto m = fit_boosted(d, BoostLoss::kLogistic, p, 1);
  const Eigen::RowVector2d hi(0.8, 0.0), lo(-0.8, 0.0);
  EXPECT_GT(m.predict_raw(hi), 2.0);
  EXPECT_LT(m.predict_raw(lo), -2.0);
}

TEST(Boost, ZeroWeightsRejected) {
  BoostData d = step_data(20, 7);
  std::fill(d.weight.begin(), d.weight.end(), 0.0);
  EXPECT_THROW(fit_boosted(d, BoostLoss::kWeightedSquared, {}, 1), DegenerateError);
}

TEST(Tuning, PicksFromGridAndIsDeterministic) {
  const auto d = step_data(300, 8);
  TuningOptions opt;
  opt.n_search = 3;
  opt.folds = 5;
  opt.max_trees = 80;
  const auto a = tune_boosted(d, BoostLoss::kWeightedSquared, opt, 4);
  const auto b = tune_boosted(d, BoostLoss::kWeightedSquared, opt, 4);
  EXPECT_EQ(a.best.to_json(), b.best.to_json());
  EXPECT_EQ(a.candidates.size(), 3u);
  const auto& g = opt.grid;
  EXPECT_NE(std::find(g.eta.begin(), g.eta.end(), a.best.eta), g.eta.end());
  EXPECT_GE(a.best.n_trees, 1);
  EXPECT_LE(a.best.n_trees, 80);
}

}  // namespace
}  // namespace ltrc
