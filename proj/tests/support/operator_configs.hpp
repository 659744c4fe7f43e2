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

// Randomized record/nuisance configurations for the closed-form versus
// composition check. Shared by the unit tests and the acceptance binary.

#ifndef LTRC_TESTS_OPERATOR_CONFIGS_HPP
#define LTRC_TESTS_OPERATOR_CONFIGS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "ltrc/operators.hpp"
#include "ltrc/rng.hpp"

namespace ltrc::testing {

// Times on a 0.25 grid so that jumps of different measures tie often.
inline double grid_time(CounterRng& rng, int lo, int hi) {
  return 0.25 * static_cast<double>(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
}

inline std::vector<double> distinct_sorted(std::vector<double> t) {
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// Increasing CDF through the given times, ending at `top`.
inline StepFunction random_cdf(CounterRng& rng, std::vector<double> times, double top) {
  StepFunction f;
  f.times = distinct_sorted(std::move(times));
  std::vector<double> w(f.times.size());
  double s = 0.0;
  for (double& x : w) s += (x = 0.05 + rng.uniform());
  double acc = 0.0;
  for (double x : w) f.values.push_back(std::min(top, (acc += x) * top / s));
  f.values.back() = top;
  return f;
}

struct Config {
  ObservedRecord r;
  RecordNuisance n;
};

// Proper F with X below its last jump and S_D away from zero: the regime in
// which the closed form and the direct composition coincide exactly.
inline Config random_config(std::uint64_t seed) {
  CounterRng rng(derive_key(seed, {0x0E9}));
  Config c;
  c.r.q = grid_time(rng, 4, 16);
  const double t_last = 12.0;
  c.r.x = c.r.q + grid_time(rng, 1, static_cast<int>((t_last - c.r.q) / 0.25) - 1);
  c.r.delta = rng.bernoulli(0.5) ? 1 : 0;
  c.r.a = rng.bernoulli(0.5) ? 1 : 0;

  std::vector<double> ft{t_last};
  const int k = 1 + static_cast<int>(rng.below(8));
  for (int i = 0; i < k; ++i) ft.push_back(grid_time(rng, 1, 47));
  c.n.f = random_cdf(rng, ft, 1.0);

  std::vector<double> gt{0.25 * std::floor(rng.uniform(0.0, c.r.q) / 0.25)};
  const int l = static_cast<int>(rng.below(9));
  for (int i = 0; i < l; ++i) gt.push_back(grid_time(rng, 0, 44));
  c.n.g = random_cdf(rng, gt, 1.0);

  const int j = static_cast<int>(rng.below(7));
  std::vector<double> st;
  for (int i = 0; i < j; ++i) st.push_back(grid_time(rng, 1, 28));
  c.n.sd.initial = 1.0;
  c.n.sd.times = distinct_sorted(st);
  double s = 1.0;
  for (std::size_t i = 0; i < c.n.sd.times.size(); ++i) c.n.sd.values.push_back(s *= rng.uniform(0.6, 0.97));
  return c;
}

constexpr double kNoTrim = 1e-12;

inline double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace ltrc::testing

#endif  // LTRC_TESTS_OPERATOR_CONFIGS_HPP
