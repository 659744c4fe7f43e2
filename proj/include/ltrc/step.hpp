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

#ifndef LTRC_STEP_HPP
#define LTRC_STEP_HPP

#include <algorithm>
#include <span>
#include <vector>

namespace ltrc {

// Right-continuous step function: value(t) = initial for t < times[0] and
// values[k] for times[k] <= t < times[k+1]. Beyond the last jump the last
// value holds (flat extrapolation).
struct StepFunction {
  std::vector<double> times;
  std::vector<double> values;
  double initial = 0.0;

  std::size_t size() const { return times.size(); }

  // Number of jumps at or before t.
  std::size_t count_le(double t) const {
    return static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }

  double operator()(double t) const {
    const std::size_t k = count_le(t);
    return k == 0 ? initial : values[k - 1];
  }

  // Value just before t.
  double left_limit(double t) const {
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.end(), t) - times.begin());
    return k == 0 ? initial : values[k - 1];
  }

  double before(std::size_t k) const { return k == 0 ? initial : values[k - 1]; }

  // Signed jump at times[k].
  double increment(std::size_t k) const { return values[k] - before(k); }

  double last() const { return values.empty() ? initial : values.back(); }
};

// Subject-level conditioning arguments shared by every nuisance.
struct Subject {
  double q = 0.0;
  int a = 0;
  std::span<const double> z;
};

}  // namespace ltrc

#endif  // LTRC_STEP_HPP
