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

#ifndef LTRC_RNG_HPP
#define LTRC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace ltrc {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Constants are the
// published ones so ports in other languages reproduce the same streams.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Derives a child key from a parent key and a list of indices. Used to give
// every (replication, record, attempt) its own independent stream.
constexpr std::uint64_t derive_key(std::uint64_t key,
                                   std::initializer_list<std::uint64_t> path) {
  for (std::uint64_t p : path) {
    key = splitmix64_mix(key + kGoldenGamma * (p + 1));
  }
  return key;
}

// Counter-based generator: the i-th output is a pure function of (key, i).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(splitmix64_mix(key)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return at(counter_++); }

  result_type at(std::uint64_t i) const {
    return splitmix64_mix(key_ + kGoldenGamma * (i + 1));
  }

  // Uniform on the open interval (0, 1); safe to pass to log().
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift; bias is below 2^-64 * n, irrelevant here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  // Weibull(shape, scale) by inversion: S(t) = exp(-(t/scale)^shape).
  double weibull(double shape, double scale) {
    return scale * std::pow(-std::log(uniform()), 1.0 / shape);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ltrc

#endif  // LTRC_RNG_HPP
