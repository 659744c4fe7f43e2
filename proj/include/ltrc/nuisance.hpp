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

// Nuisance models (pi, F, G, S_D) and the scheme-(a) fitting pipeline:
// S_D first, then G with inverse censoring weights from S_D, then pi with
// weights from (G, S_D); F is fit on its own.

#ifndef LTRC_NUISANCE_HPP
#define LTRC_NUISANCE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ltrc/cox.hpp"
#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/features.hpp"
#include "ltrc/gbdt.hpp"
#include "ltrc/logistic.hpp"
#include "ltrc/step.hpp"

namespace ltrc {

enum class DistributionKind { kCdfF, kCdfG, kSurvivalSD };

inline std::string to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::kCdfF:
      return "cdf_F";
    case DistributionKind::kCdfG:
      return "cdf_G";
    case DistributionKind::kSurvivalSD:
      return "survival_SD";
  }
  return "";
}

// Known conditional law evaluated on a per-subject quantile grid. `value`
// is the CDF (F, G) or survival function (S_D); `quantile(p)` returns the
// time where the CDF (or 1 - survival) reaches p.
struct AnalyticLaw {
  std::function<double(double, const Subject&)> value;
  std::function<double(double, const Subject&)> quantile;
  std::vector<double> levels;  // increasing in (0, 1]

  // Equal levels k/m plus geometric tails toward 0 and 1.
  static std::vector<double> default_levels(int m = 2000, int tail_digits = 7) {
    std::vector<double> p;
    for (int d = tail_digits; d >= 1; --d) {
      const double v = std::pow(10.0, -d - std::log10(static_cast<double>(m)));
      p.push_back(v);
    }
    for (int k = 1; k < m; ++k) p.push_back(static_cast<double>(k) / m);
    for (int d = 1; d <= tail_digits; ++d) {
      p.push_back(1.0 - std::pow(10.0, -d - std::log10(static_cast<double>(m))));
    }
    p.push_back(1.0);
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    return p;
  }
};

class ConditionalDistribution {
 public:
  ConditionalDistribution() = default;

  static ConditionalDistribution from_cox(DistributionKind kind, CoxModel model,
                                          FeatureMap features, std::string provenance) {
    ConditionalDistribution d;
    d.kind_ = kind;
    d.provenance_ = std::move(provenance);
    auto cox = std::make_shared<CoxPart>();
    cox->model = std::move(model);
    cox->features = std::move(features);
    const auto& inc = cox->model.baseline_hazard_increments;
    cox->cumulative.resize(inc.size());
    double s = 0.0;
    for (std::size_t k = 0; k < inc.size(); ++k) cox->cumulative[k] = (s += inc[k]);
    d.cox_ = std::move(cox);
    return d;
  }

  static ConditionalDistribution analytic(DistributionKind kind, AnalyticLaw law,
                                          std::string provenance) {
    ConditionalDistribution d;
    d.kind_ = kind;
    d.provenance_ = std::move(provenance);
    d.law_ = std::make_shared<AnalyticLaw>(std::move(law));
    return d;
  }

  DistributionKind kind() const { return kind_; }
  const std::string& provenance() const { return provenance_; }
  bool empty() const { return !cox_ && !law_; }
  const CoxModel* cox_model() const { return cox_ ? &cox_->model : nullptr; }
  const FeatureMap* feature_map() const { return cox_ ? &cox_->features : nullptr; }

  // Right-continuous step function in t for one subject; CDF kinds start at
  // 0 and survival kinds at 1, except reversed-time G (see below).
  StepFunction evaluate(const Subject& s) const {
    if (empty()) throw ArgumentError("conditional distribution not fitted");
    return cox_ ? evaluate_cox(s) : evaluate_law(s);
  }

  double at(double t, const Subject& s) const { return evaluate(s)(t); }

 private:
  struct CoxPart {
    CoxModel model;
    FeatureMap features;
    std::vector<double> cumulative;
  };

  StepFunction evaluate_cox(const Subject& s) const {
    const auto& m = cox_->model;
    std::vector<double> x(cox_->features.dim());
    cox_->features.apply(s, x.data());
    const double risk = std::exp(m.linear_predictor(x.data()));
    const auto& cum = cox_->cumulative;
    const std::size_t K = cum.size();
    StepFunction f;
    f.times.resize(K);
    f.values.resize(K);
    switch (kind_) {
      case DistributionKind::kCdfF:
        f.initial = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          f.times[k] = m.baseline_times[k];
          f.values[k] = -std::expm1(-risk * cum[k]);
        }
        break;
      case DistributionKind::kSurvivalSD:
        f.initial = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
          f.times[k] = m.baseline_times[k];
          f.values[k] = std::exp(-risk * cum[k]);
        }
        break;
      case DistributionKind::kCdfG: {
        // Reversed scale s = pivot - t. G(t) = P(Q <= t) = P(S >= pivot - t)
        // = exp(-risk * sum_{q_k > t} dLambda_k), right-continuous in t.
        // Below the smallest jump G keeps the fitted tail mass
        // exp(-risk * Lambda_total) instead of dropping to 0.
        const double total = K ? cum[K - 1] : 0.0;
        f.initial = std::exp(-risk * total);
        for (std::size_t j = 0; j < K; ++j) {
          const std::size_t k = K - 1 - j;
          f.times[j] = m.pivot - m.baseline_times[k];
          const double before = k == 0 ? 0.0 : cum[k - 1];
          f.values[j] = std::exp(-risk * before);
        }
        break;
      }
    }
    return f;
  }

  StepFunction evaluate_law(const Subject& s) const {
    const auto& law = *law_;
    StepFunction f;
    f.initial = kind_ == DistributionKind::kSurvivalSD ? 1.0 : 0.0;
    f.times.reserve(law.levels.size());
    f.values.reserve(law.levels.size());
    for (double p : law.levels) {
      const double t = law.quantile(p, s);
      if (!std::isfinite(t)) continue;
      if (!f.times.empty() && t <= f.times.back()) continue;
      f.times.push_back(t);
      f.values.push_back(law.value(t, s));
    }
    // CDF kinds are made proper at the last grid point.
    if (kind_ != DistributionKind::kSurvivalSD && !f.values.empty()) f.values.back() = 1.0;
    return f;
  }

  DistributionKind kind_ = DistributionKind::kCdfF;
  std::string provenance_;
  std::shared_ptr<const CoxPart> cox_;
  std::shared_ptr<const AnalyticLaw> law_;
};

class PropensityModel {
 public:
  enum class Kind { kLogistic, kBoosted, kAnalytic };

  static PropensityModel logistic(LogisticFit fit, FeatureMap features, std::string provenance) {
    PropensityModel m;
    m.kind_ = Kind::kLogistic;
    m.logistic_ = std::make_shared<LogisticFit>(std::move(fit));
    m.features_ = std::move(features);
    m.provenance_ = std::move(provenance);
    return m;
  }

  static PropensityModel boosted(BoostedModel model, std::size_t p, std::string provenance) {
    PropensityModel m;
    m.kind_ = Kind::kBoosted;
    m.boosted_ = std::make_shared<BoostedModel>(std::move(model));
    m.p_ = p;
    m.provenance_ = std::move(provenance);
    return m;
  }

  static PropensityModel analytic(std::function<double(const Subject&)> f, std::string provenance) {
    PropensityModel m;
    m.kind_ = Kind::kAnalytic;
    m.analytic_ = std::move(f);
    m.provenance_ = std::move(provenance);
    return m;
  }

  Kind kind() const { return kind_; }
  const std::string& provenance() const { return provenance_; }
  const LogisticFit* logistic_fit() const { return logistic_.get(); }
  const BoostedModel* boosted_model() const { return boosted_.get(); }

  bool empty() const { return !logistic_ && !boosted_ && !analytic_; }

  // Untrimmed pi(z) in (0, 1).
  double predict(const Subject& s) const {
    if (empty()) throw ArgumentError("propensity model not fitted");
    switch (kind_) {
      case Kind::kLogistic: {
        std::vector<double> x(features_.dim());
        features_.apply(s, x.data());
        return logistic_->predict(x.data());
      }
      case Kind::kBoosted: {
        const Eigen::Map<const Eigen::RowVectorXd> x(s.z.data(), static_cast<Eigen::Index>(p_));
        return expit(boosted_->predict_raw(x));
      }
      case Kind::kAnalytic:
        return analytic_(s);
    }
    return 0.5;
  }

 private:
  Kind kind_ = Kind::kLogistic;
  std::shared_ptr<const LogisticFit> logistic_;
  std::shared_ptr<const BoostedModel> boosted_;
  std::function<double(const Subject&)> analytic_;
  FeatureMap features_;
  std::size_t p_ = 0;
  std::string provenance_;
};

struct NuisanceBundle {
  PropensityModel pi;
  ConditionalDistribution f;
  ConditionalDistribution g;
  ConditionalDistribution sd;
  double trim_floor = 0.1;
  std::string scheme = "a";

  nlohmann::json provenance() const {
    return {{"scheme", scheme},
            {"trim_floor", trim_floor},
            {"pi", pi.provenance()},
            {"F", f.provenance()},
            {"G", g.provenance()},
            {"S_D", sd.provenance()}};
  }
};

// ---------------------------------------------------------------------------
// Model specifications

struct NuisanceSpec {
  enum class Model { kCox, kCoxMisspec, kPCox, kLogistic, kLogisticMisspec, kGbm };
  Model model = Model::kCox;
  std::vector<std::string> features;  // overrides the model's default terms
  std::optional<double> ridge;        // per unit of total weight; pcox skips CV when set
  int df = 7;
  int cv_folds = 5;
  std::vector<double> ridge_grid{1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
  BoostParams boost = default_gbm();

  static BoostParams default_gbm() {
    BoostParams p;
    p.n_trees = 500;
    p.max_depth = 2;
    p.eta = 0.05;
    p.subsample = 0.5;
    p.min_child_count = 10;
    p.lambda = 1e-6;
    return p;
  }

  static NuisanceSpec of(Model m) {
    NuisanceSpec s;
    s.model = m;
    return s;
  }

  static std::string model_name(Model m) {
    switch (m) {
      case Model::kCox:
        return "cox";
      case Model::kCoxMisspec:
        return "cox_misspec";
      case Model::kPCox:
        return "pcox";
      case Model::kLogistic:
        return "logistic";
      case Model::kLogisticMisspec:
        return "logistic_misspec";
      case Model::kGbm:
        return "gbm";
    }
    return "";
  }

  std::string label() const {
    switch (model) {
      case Model::kCox:
        return "Cox1";
      case Model::kCoxMisspec:
        return "Cox2";
      case Model::kPCox:
        return "pCox";
      case Model::kLogistic:
        return "lgs1";
      case Model::kLogisticMisspec:
        return "lgs2";
      case Model::kGbm:
        return "gbm";
    }
    return "";
  }

  bool is_propensity() const {
    return model == Model::kLogistic || model == Model::kLogisticMisspec || model == Model::kGbm;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"model", model_name(model)}};
    if (!features.empty()) j["features"] = features;
    if (ridge) j["ridge"] = *ridge;
    if (model == Model::kPCox) j["df"] = df;
    if (model == Model::kGbm) j["boost"] = boost.to_json();
    return j;
  }

  static NuisanceSpec from_json(const nlohmann::json& j) {
    if (j.is_string()) return from_json(nlohmann::json{{"model", j}});
    NuisanceSpec s;
    bool have_model = false;
    for (const auto& [key, v] : j.items()) {
      if (key == "model") {
        const auto name = v.get<std::string>();
        bool found = false;
        for (auto m : {Model::kCox, Model::kCoxMisspec, Model::kPCox, Model::kLogistic,
                       Model::kLogisticMisspec, Model::kGbm}) {
          if (name == model_name(m)) {
            s.model = m;
            found = true;
          }
        }
        if (!found) throw SchemaError("unknown nuisance model: " + name);
        have_model = true;
      } else if (key == "features") {
        s.features = v.get<std::vector<std::string>>();
      } else if (key == "ridge") {
        s.ridge = v.get<double>();
        if (*s.ridge < 0) throw SchemaError("ridge must be nonnegative");
      } else if (key == "df") {
        s.df = v.get<int>();
      } else if (key == "cv_folds") {
        s.cv_folds = v.get<int>();
      } else if (key == "ridge_grid") {
        s.ridge_grid = v.get<std::vector<double>>();
      } else if (key == "boost") {
        s.boost = BoostParams::from_json(v);
      } else {
        throw SchemaError("unknown key in nuisance spec: " + key);
      }
    }
    if (!have_model) throw SchemaError("nuisance spec missing 'model'");
    return s;
  }
};

namespace detail {

inline std::vector<Subject> subjects_of(const Dataset& data) {
  std::vector<Subject> s;
  s.reserve(data.size());
  for (const auto& r : data.records) s.push_back({r.q, r.a, r.z});
  return s;
}

inline Subject subject_of(const ObservedRecord& r) { return {r.q, r.a, r.z}; }

// Default feature terms per model; `with_q` for S_D.
inline FeatureSpec cox_feature_spec(const NuisanceSpec& spec, std::size_t p, bool with_q) {
  if (!spec.features.empty()) return FeatureSpec::from_terms(spec.features);
  switch (spec.model) {
    case NuisanceSpec::Model::kCox:
      return FeatureSpec::identity(p, true, with_q);
    case NuisanceSpec::Model::kCoxMisspec: {
      std::vector<std::string> t{"a*z1", "z2^2"};
      if (with_q) t.push_back("q");
      return FeatureSpec::from_terms(t);
    }
    case NuisanceSpec::Model::kPCox: {
      std::vector<VarRef> vars;
      for (std::size_t j = 0; j < p; ++j) vars.push_back({VarRef::Kind::kZ, j});
      if (with_q) vars.push_back({VarRef::Kind::kQ, 0});
      vars.push_back({VarRef::Kind::kA, 0});
      return FeatureSpec::spline(vars, spec.df);
    }
    default:
      throw ArgumentError("model '" + NuisanceSpec::model_name(spec.model) +
                          "' cannot fit a distribution");
  }
}

inline FeatureSpec logistic_feature_spec(const NuisanceSpec& spec, std::size_t p) {
  if (!spec.features.empty()) return FeatureSpec::from_terms(spec.features, true);
  if (spec.model == NuisanceSpec::Model::kLogisticMisspec) {
    return FeatureSpec::from_terms({"z1^2", "z2^2"}, true);
  }
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= p; ++j) names.push_back("z" + std::to_string(j));
  return FeatureSpec::from_terms(names, true);
}

inline Eigen::MatrixXd design(const FeatureMap& map, const std::vector<Subject>& subjects) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(subjects.size()),
                    static_cast<Eigen::Index>(map.dim()));
  std::vector<double> row(map.dim());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    map.apply(subjects[i], row.data());
    for (std::size_t j = 0; j < row.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return x;
}

inline CoxRows subset_rows(const CoxRows& r, const std::vector<std::size_t>& idx) {
  CoxRows out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), r.x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.entry.push_back(r.entry[idx[k]]);
    out.exit.push_back(r.exit[idx[k]]);
    out.event.push_back(r.event[idx[k]]);
    out.weight.push_back(r.weight[idx[k]]);
    out.x.row(static_cast<Eigen::Index>(k)) = r.x.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

// Ridge Cox on standardized features; the penalty is per unit of total
// weight. Without an explicit value it is chosen from the grid by K-fold
// cross-validated partial likelihood (fold contribution l(b_-k) - l_-k(b_-k)).
inline CoxModel fit_penalized_cox(const CoxRows& rows, const NuisanceSpec& spec,
                                  std::uint64_t seed) {
  double total_w = 0.0;
  for (double w : rows.weight) total_w += w;
  CoxOptions opt;
  opt.standardize = true;
  opt.tolerance = 1e-6 * std::max(1.0, total_w);
  if (spec.ridge) {
    opt.ridge = *spec.ridge * total_w;
    return fit_cox(rows, opt);
  }
  std::vector<double> grid = spec.ridge_grid;
  std::sort(grid.rbegin(), grid.rend());
  const auto folds = make_folds(rows.size(), static_cast<std::size_t>(spec.cv_folds), seed);
  std::vector<double> score(grid.size(), 0.0);
  for (int k = 1; k <= spec.cv_folds; ++k) {
    const CoxRows train = subset_rows(rows, folds.complement(k));
    double train_w = 0.0;
    for (double w : train.weight) train_w += w;
    Eigen::VectorXd warm;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CoxOptions o = opt;
      o.ridge = grid[g] * train_w;
      o.tolerance = 1e-6 * std::max(1.0, train_w);
      o.initial_beta = warm;
      CoxModel m;
      try {
        m = fit_cox(train, o);
      } catch (const ConvergenceError&) {
        score[g] = -std::numeric_limits<double>::infinity();
        continue;
      }
      warm = m.beta;
      score[g] += cox_log_partial_likelihood(rows, m.beta) -
                  cox_log_partial_likelihood(train, m.beta);
    }
  }
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(score.begin(), score.end()) - score.begin());
  opt.ridge = grid[best] * total_w;
  return fit_cox(rows, opt);
}

inline CoxModel fit_cox_spec(const CoxRows& rows, const NuisanceSpec& spec, std::uint64_t seed) {
  if (spec.model == NuisanceSpec::Model::kPCox) return fit_penalized_cox(rows, spec, seed);
  CoxOptions opt;
  if (spec.ridge) {
    double total_w = 0.0;
    for (double w : rows.weight) total_w += w;
    opt.ridge = *spec.ridge * total_w;
  }
  return fit_cox(rows, opt);
}

inline std::string describe(const FeatureMap& map) {
  std::string out;
  for (const auto& n : map.names()) out += (out.empty() ? "" : ",") + n;
  if (map.spec().kind == FeatureSpec::Kind::kSpline) {
    return "spline(df=" + std::to_string(map.spec().df) + "): " + std::to_string(map.dim()) +
           " features";
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fitting

inline ConditionalDistribution fit_event_cdf_F(const Dataset& data, const NuisanceSpec& spec,
                                               std::uint64_t seed = 0) {
  require_valid(data);
  const auto subjects = detail::subjects_of(data);
  const auto map = FeatureMap::fit(detail::cox_feature_spec(spec, data.p, false), subjects);
  CoxRows rows;
  rows.x = detail::design(map, subjects);
  for (const auto& r : data.records) {
    rows.entry.push_back(r.q);
    rows.exit.push_back(r.x);
    rows.event.push_back(r.delta);
    rows.weight.push_back(1.0);
  }
  auto model = detail::fit_cox_spec(rows, spec, seed);
  model.feature_description = detail::describe(map);
  return ConditionalDistribution::from_cox(DistributionKind::kCdfF, std::move(model), map,
                                           "F:" + spec.label());
}

inline ConditionalDistribution fit_residual_censoring_S(const Dataset& data,
                                                        const NuisanceSpec& spec,
                                                        std::uint64_t seed = 0) {
  require_valid(data);
  if (std::none_of(data.records.begin(), data.records.end(),
                   [](const ObservedRecord& r) { return r.delta == 0; })) {
    throw DegenerateError("S_D is unidentifiable: no censored observations");
  }
  const auto subjects = detail::subjects_of(data);
  const auto map = FeatureMap::fit(detail::cox_feature_spec(spec, data.p, true), subjects);
  CoxRows rows;
  rows.x = detail::design(map, subjects);
  for (const auto& r : data.records) {
    rows.entry.push_back(0.0);
    rows.exit.push_back(r.x - r.q);
    rows.event.push_back(1 - r.delta);
    rows.weight.push_back(1.0);
  }
  auto model = detail::fit_cox_spec(rows, spec, seed);
  model.feature_description = detail::describe(map);
  return ConditionalDistribution::from_cox(DistributionKind::kSurvivalSD, std::move(model), map,
                                           "S_D:" + spec.label());
}

inline ConditionalDistribution fit_truncation_cdf_G(const Dataset& data,
                                                    const ConditionalDistribution& sd_hat,
                                                    const NuisanceSpec& spec, double trim_floor,
                                                    std::uint64_t seed = 0) {
  require_valid(data);
  require_trim_floor(trim_floor);
  std::vector<Subject> subjects;
  std::vector<double> weight;
  double pivot = 0.0;
  for (const auto& r : data.records) pivot = std::max(pivot, r.x);
  pivot += 1.0;
  CoxRows rows;
  for (const auto& r : data.records) {
    if (r.delta != 1) continue;
    const Subject s = detail::subject_of(r);
    subjects.push_back(s);
    rows.entry.push_back(pivot - r.x);
    rows.exit.push_back(pivot - r.q);
    rows.event.push_back(1);
    rows.weight.push_back(1.0 / trim_probability(sd_hat.at(r.x - r.q, s), trim_floor));
  }
  if (subjects.empty()) throw DegenerateError("G is unidentifiable: no uncensored observations");
  const auto map = FeatureMap::fit(detail::cox_feature_spec(spec, data.p, false), subjects);
  rows.x = detail::design(map, subjects);
  auto model = detail::fit_cox_spec(rows, spec, seed);
  model.orientation = TimeOrientation::kReversed;
  model.pivot = pivot;
  model.feature_description = detail::describe(map);
  return ConditionalDistribution::from_cox(DistributionKind::kCdfG, std::move(model), map,
                                           "G:" + spec.label() + "|ipcw(" + sd_hat.provenance() + ")");
}

// Per-record weight delta / {trim G(x) trim S_D(x - q)} used by the pi fit.
inline std::vector<double> propensity_weights(const Dataset& data,
                                              const ConditionalDistribution& g_hat,
                                              const ConditionalDistribution& sd_hat,
                                              double trim_floor) {
  std::vector<double> w;
  w.reserve(data.size());
  for (const auto& r : data.records) {
    if (r.delta == 0) {
      w.push_back(0.0);
      continue;
    }
    const Subject s = detail::subject_of(r);
    w.push_back(1.0 / (trim_probability(g_hat.at(r.x, s), trim_floor) *
                       trim_probability(sd_hat.at(r.x - r.q, s), trim_floor)));
  }
  return w;
}

inline PropensityModel fit_propensity_weighted(const Dataset& data, const std::vector<double>& w,
                                               const NuisanceSpec& spec, std::uint64_t seed,
                                               const std::string& provenance) {
  const auto subjects = detail::subjects_of(data);
  std::vector<double> y;
  for (const auto& r : data.records) y.push_back(r.a);
  if (spec.model == NuisanceSpec::Model::kGbm) {
    BoostData d;
    d.x.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.p));
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t j = 0; j < data.p; ++j) {
        d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i].z[j];
      }
    }
    d.y = y;
    d.weight = w;
    return PropensityModel::boosted(fit_boosted(d, BoostLoss::kLogistic, spec.boost, seed), data.p,
                                    provenance);
  }
  if (!spec.is_propensity()) {
    throw ArgumentError("model '" + NuisanceSpec::model_name(spec.model) +
                        "' cannot fit a propensity score");
  }
  const auto map = FeatureMap::fit(detail::logistic_feature_spec(spec, data.p), subjects);
  LogisticOptions opt;
  if (spec.ridge) opt.ridge = *spec.ridge;
  return PropensityModel::logistic(fit_logistic(detail::design(map, subjects), y, w, opt), map,
                                   provenance);
}

inline PropensityModel fit_propensity(const Dataset& data, const ConditionalDistribution& g_hat,
                                      const ConditionalDistribution& sd_hat,
                                      const NuisanceSpec& spec, double trim_floor,
                                      std::uint64_t seed = 0) {
  require_valid(data);
  require_trim_floor(trim_floor);
  return fit_propensity_weighted(data, propensity_weights(data, g_hat, sd_hat, trim_floor), spec,
                                 seed,
                                 "pi:" + spec.label() + "|w(" + g_hat.provenance() + "," +
                                     sd_hat.provenance() + ")");
}

struct SchemeConfig {
  NuisanceSpec f = NuisanceSpec::of(NuisanceSpec::Model::kCox);
  NuisanceSpec pi = NuisanceSpec::of(NuisanceSpec::Model::kLogistic);
  NuisanceSpec g = NuisanceSpec::of(NuisanceSpec::Model::kCox);
  NuisanceSpec sd = NuisanceSpec::of(NuisanceSpec::Model::kCox);
  double trim_floor = 0.1;

  // "F/pi-G-S_D" in the usual table notation.
  std::string label() const {
    return f.label() + "/" + pi.label() + "-" + g.label() + "-" + sd.label();
  }

  nlohmann::json to_json() const {
    return {{"F", f.to_json()}, {"pi", pi.to_json()}, {"G", g.to_json()},
            {"S_D", sd.to_json()}, {"trim_floor", trim_floor}};
  }

  static SchemeConfig from_json(const nlohmann::json& j) {
    SchemeConfig c;
    for (const auto& [key, v] : j.items()) {
      if (key == "F") c.f = NuisanceSpec::from_json(v);
      else if (key == "pi") c.pi = NuisanceSpec::from_json(v);
      else if (key == "G") c.g = NuisanceSpec::from_json(v);
      else if (key == "S_D") c.sd = NuisanceSpec::from_json(v);
      else if (key == "trim_floor") c.trim_floor = v.get<double>();
      else throw SchemaError("unknown key in nuisance config: " + key);
    }
    return c;
  }
};

// S_D, then G and pi; F is left empty (IPW needs only these).
inline NuisanceBundle fit_weighting_models(const Dataset& data, const SchemeConfig& cfg,
                                           std::uint64_t seed = 0) {
  require_valid(data);
  require_trim_floor(cfg.trim_floor);
  NuisanceBundle b;
  b.trim_floor = cfg.trim_floor;
  b.scheme = "a";
  b.sd = fit_residual_censoring_S(data, cfg.sd, derive_key(seed, {1}));
  b.g = fit_truncation_cdf_G(data, b.sd, cfg.g, cfg.trim_floor, derive_key(seed, {2}));
  b.pi = fit_propensity(data, b.g, b.sd, cfg.pi, cfg.trim_floor, derive_key(seed, {3}));
  return b;
}

inline NuisanceBundle fit_scheme_a(const Dataset& data, const SchemeConfig& cfg,
                                   std::uint64_t seed = 0) {
  NuisanceBundle b = fit_weighting_models(data, cfg, seed);
  b.f = fit_event_cdf_F(data, cfg.f, derive_key(seed, {4}));
  return b;
}

}  // namespace ltrc

#endif  // LTRC_NUISANCE_HPP
