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

// Covariate-to-feature maps used by the nuisance models: explicit product
// terms (e.g. "a", "z1", "a*z1", "z2^2") and the flexible natural-spline
// expansion with squares and pairwise interactions.

#ifndef LTRC_FEATURES_HPP
#define LTRC_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltrc/error.hpp"
#include "ltrc/step.hpp"

namespace ltrc {

struct VarRef {
  enum class Kind { kA, kQ, kZ };
  Kind kind = Kind::kZ;
  std::size_t index = 0;  // z index (0-based) when kind == kZ

  double value(const Subject& s) const {
    switch (kind) {
      case Kind::kA:
        return s.a;
      case Kind::kQ:
        return s.q;
      case Kind::kZ:
        return s.z[index];
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::kA:
        return "a";
      case Kind::kQ:
        return "q";
      case Kind::kZ:
        return "z" + std::to_string(index + 1);
    }
    return "";
  }

  static VarRef parse(const std::string& s) {
    if (s == "a") return {Kind::kA, 0};
    if (s == "q") return {Kind::kQ, 0};
    if (s.size() >= 2 && s[0] == 'z') {
      std::size_t pos = 0;
      int idx = 0;
      try {
        idx = std::stoi(s.substr(1), &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == s.size() - 1 && idx >= 1) {
        return {Kind::kZ, static_cast<std::size_t>(idx - 1)};
      }
    }
    throw SchemaError("unknown variable in feature term: '" + s + "'");
  }
};

// Product of powers of variables, e.g. "a*z1" or "z2^2".
struct Term {
  std::vector<std::pair<VarRef, int>> factors;

  double value(const Subject& s) const {
    double v = 1.0;
    for (const auto& [var, power] : factors) {
      const double x = var.value(s);
      for (int k = 0; k < power; ++k) v *= x;
    }
    return v;
  }

  std::string name() const {
    std::string out;
    for (const auto& [var, power] : factors) {
      if (!out.empty()) out += "*";
      out += var.name();
      if (power != 1) out += "^" + std::to_string(power);
    }
    return out.empty() ? "1" : out;
  }

  static Term parse(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    Term t;
    if (s == "1") return t;
    std::size_t start = 0;
    while (start <= s.size()) {
      std::size_t end = s.find_first_of("*:", start);
      if (end == std::string::npos) end = s.size();
      std::string factor = s.substr(start, end - start);
      int power = 1;
      const std::size_t caret = factor.find('^');
      if (caret != std::string::npos) {
        try {
          power = std::stoi(factor.substr(caret + 1));
        } catch (const std::exception&) {
          throw SchemaError("bad power in feature term '" + s + "'");
        }
        if (power < 1 || power > 4) {
          throw SchemaError("power out of range in feature term '" + s + "'");
        }
        factor = factor.substr(0, caret);
      }
      t.factors.emplace_back(VarRef::parse(factor), power);
      start = end + 1;
    }
    return t;
  }
};

// Natural cubic spline basis (truncated-power form) with K knots; spans the
// same space as R's splines::ns() with df = K - 1 and no intercept.
class NaturalSplineBasis {
 public:
  NaturalSplineBasis() = default;

  // Knots at the j/df quantiles (j = 1..df-1) plus the range endpoints.
  static NaturalSplineBasis from_data(std::vector<double> values, int df) {
    if (df < 3) throw ArgumentError("natural spline df must be >= 3");
    if (values.empty()) throw ArgumentError("spline basis needs data");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
      // R type-7 quantile.
      const double h = (values.size() - 1) * p;
      const std::size_t lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, values.size() - 1);
      return values[lo] + (h - lo) * (values[hi] - values[lo]);
    };
    NaturalSplineBasis b;
    b.df_ = df;
    for (int j = 0; j <= df; ++j) b.knots_.push_back(quantile(double(j) / df));
    b.knots_.erase(std::unique(b.knots_.begin(), b.knots_.end()), b.knots_.end());
    return b;
  }

  // Always df columns; degenerate knot sets pad with zero columns so the
  // feature count depends on the spec only.
  int size() const { return df_; }

  void evaluate(double x, double* out) const {
    std::fill(out, out + df_, 0.0);
    out[0] = x;
    const std::size_t K = knots_.size();
    if (K < 3) return;
    const double last = knots_[K - 1];
    auto d = [&](std::size_t k) {
      const double a = std::max(x - knots_[k], 0.0);
      const double b = std::max(x - last, 0.0);
      return (a * a * a - b * b * b) / (last - knots_[k]);
    };
    const double d_prev = d(K - 2);
    for (std::size_t k = 0; k + 2 < K && static_cast<int>(k) + 1 < df_; ++k) {
      out[k + 1] = d(k) - d_prev;
    }
  }

  const std::vector<double>& knots() const { return knots_; }

 private:
  int df_ = 0;
  std::vector<double> knots_;
};

// Declarative description; fitted against training subjects by FeatureMap.
struct FeatureSpec {
  enum class Kind { kTerms, kSpline };
  Kind kind = Kind::kTerms;
  std::vector<Term> terms;  // kTerms
  bool intercept = false;   // prepend a constant column (logistic models)
  // kSpline: which variables enter; continuous vs binary is decided from data
  // (a is always binary, q always continuous).
  std::vector<VarRef> variables;
  int df = 7;
  bool with_squares = true;
  bool with_interactions = true;

  static FeatureSpec from_terms(const std::vector<std::string>& names,
                                bool intercept = false) {
    FeatureSpec s;
    s.kind = Kind::kTerms;
    s.intercept = intercept;
    for (const auto& n : names) s.terms.push_back(Term::parse(n));
    return s;
  }

  // Treatment first, then covariates: (a, z1, ..., zp).
  static FeatureSpec identity(std::size_t p, bool with_treatment = true,
                              bool with_q = false) {
    std::vector<std::string> names;
    if (with_treatment) names.push_back("a");
    for (std::size_t j = 1; j <= p; ++j) names.push_back("z" + std::to_string(j));
    if (with_q) names.push_back("q");
    return from_terms(names);
  }

  static FeatureSpec spline(std::vector<VarRef> vars, int df = 7,
                            bool squares = true, bool interactions = true) {
    if (df < 3) throw ArgumentError("natural spline df must be >= 3");
    FeatureSpec s;
    s.kind = Kind::kSpline;
    s.variables = std::move(vars);
    s.df = df;
    s.with_squares = squares;
    s.with_interactions = interactions;
    return s;
  }
};

class FeatureMap {
 public:
  FeatureMap() = default;

  static FeatureMap fit(const FeatureSpec& spec, const std::vector<Subject>& train) {
    FeatureMap m;
    m.spec_ = spec;
    if (spec.kind == FeatureSpec::Kind::kSpline) {
      for (const VarRef& v : spec.variables) {
        bool binary = v.kind == VarRef::Kind::kA;
        if (v.kind == VarRef::Kind::kZ) {
          binary = std::all_of(train.begin(), train.end(), [&](const Subject& s) {
            const double x = v.value(s);
            return x == 0.0 || x == 1.0;
          });
        }
        if (binary) {
          m.binary_.push_back(v);
        } else {
          std::vector<double> values;
          values.reserve(train.size());
          for (const auto& s : train) values.push_back(v.value(s));
          m.continuous_.push_back(v);
          m.bases_.push_back(NaturalSplineBasis::from_data(std::move(values), spec.df));
        }
      }
    }
    m.dim_ = m.compute_dim();
    return m;
  }

  std::size_t dim() const { return dim_; }
  const FeatureSpec& spec() const { return spec_; }

  void apply(const Subject& s, double* out) const {
    std::size_t k = 0;
    if (spec_.intercept) out[k++] = 1.0;
    if (spec_.kind == FeatureSpec::Kind::kTerms) {
      for (const auto& t : spec_.terms) out[k++] = t.value(s);
      return;
    }
    const int df = spec_.df;
    const std::size_t nb = bases_.size() * df;
    double* basis = out + k;
    for (std::size_t c = 0; c < bases_.size(); ++c) {
      bases_[c].evaluate(continuous_[c].value(s), basis + c * df);
    }
    k += nb;
    if (spec_.with_squares) {
      for (std::size_t i = 0; i < nb; ++i) out[k++] = basis[i] * basis[i];
    }
    if (spec_.with_interactions) {
      for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = i + 1; j < nb; ++j) out[k++] = basis[i] * basis[j];
      }
      for (const VarRef& b : binary_) {
        const double bv = b.value(s);
        for (std::size_t i = 0; i < nb; ++i) out[k++] = basis[i] * bv;
      }
    }
    for (const VarRef& b : binary_) out[k++] = b.value(s);
    if (spec_.with_interactions) {
      for (std::size_t i = 0; i < binary_.size(); ++i) {
        for (std::size_t j = i + 1; j < binary_.size(); ++j) {
          out[k++] = binary_[i].value(s) * binary_[j].value(s);
        }
      }
    }
  }

  std::vector<double> apply(const Subject& s) const {
    std::vector<double> out(dim_);
    apply(s, out.data());
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (spec_.intercept) out.push_back("(intercept)");
    if (spec_.kind == FeatureSpec::Kind::kTerms) {
      for (const auto& t : spec_.terms) out.push_back(t.name());
      return out;
    }
    std::vector<std::string> basis;
    for (const auto& v : continuous_) {
      for (int j = 1; j <= spec_.df; ++j) basis.push_back("ns(" + v.name() + ")" + std::to_string(j));
    }
    out.insert(out.end(), basis.begin(), basis.end());
    if (spec_.with_squares) {
      for (const auto& b : basis) out.push_back(b + "^2");
    }
    if (spec_.with_interactions) {
      for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = i + 1; j < basis.size(); ++j) out.push_back(basis[i] + "*" + basis[j]);
      }
      for (const auto& b : binary_) {
        for (const auto& bs : basis) out.push_back(bs + "*" + b.name());
      }
    }
    for (const auto& b : binary_) out.push_back(b.name());
    if (spec_.with_interactions) {
      for (std::size_t i = 0; i < binary_.size(); ++i) {
        for (std::size_t j = i + 1; j < binary_.size(); ++j) {
          out.push_back(binary_[i].name() + "*" + binary_[j].name());
        }
      }
    }
    return out;
  }

 private:
  std::size_t compute_dim() const {
    std::size_t d = spec_.intercept ? 1 : 0;
    if (spec_.kind == FeatureSpec::Kind::kTerms) return d + spec_.terms.size();
    const std::size_t nb = bases_.size() * spec_.df;
    const std::size_t nbin = binary_.size();
    d += nb + nbin;
    if (spec_.with_squares) d += nb;
    if (spec_.with_interactions) d += nb * (nb - (nb ? 1 : 0)) / 2 + nb * nbin + nbin * (nbin - (nbin ? 1 : 0)) / 2;
    return d;
  }

  FeatureSpec spec_;
  std::vector<VarRef> continuous_;
  std::vector<VarRef> binary_;
  std::vector<NaturalSplineBasis> bases_;
  std::size_t dim_ = 0;
};

// Convenience form of the expansion for a single subject.
inline std::vector<double> expand_features(const Subject& s, const FeatureSpec& spec,
                                           const std::vector<Subject>& train) {
  return FeatureMap::fit(spec, train).apply(s);
}

}  // namespace ltrc

#endif  // LTRC_FEATURES_HPP
