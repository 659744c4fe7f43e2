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

// Orthogonal CATE learning under left truncation and right censoring.
//
// Every loss is folded into rows (weight, outcome, multiplier, v) whose
// contribution is weight * {outcome - multiplier * tau(v)}^2:
//   R:     V(1), V(nu)/V(1) - mu~(Z),                  A - pi(Z),  v = Z
//   DR:    V(1), w {V(nu)/V(1) - mu(A,Z)} + mu1 - mu0, 1
//   IPW.S: delta / {G(X) S_D(X - Q)}, mu1 - mu0,        1
// Weights may be negative; the second stage must accept that.

#ifndef LTRC_CATE_HPP
#define LTRC_CATE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltrc/ate.hpp"
#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/gbdt.hpp"
#include "ltrc/nuisance.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {

inline constexpr double kMinVOne = 1e-10;

enum class CateLoss { kR, kDR, kIpwS };

inline std::string to_string(CateLoss l) {
  switch (l) {
    case CateLoss::kR: return "ltrcR";
    case CateLoss::kDR: return "ltrcDR";
    case CateLoss::kIpwS: return "ipwS";
  }
  return "";
}

inline CateLoss parse_cate_loss(const std::string& s) {
  if (s == "ltrcR" || s == "R" || s == "r") return CateLoss::kR;
  if (s == "ltrcDR" || s == "DR" || s == "dr") return CateLoss::kDR;
  if (s == "ipwS" || s == "IPW.S" || s == "ipw_s") return CateLoss::kIpwS;
  throw ArgumentError("unknown CATE loss: " + s);
}

struct PseudoObservation {
  double weight = 0.0;
  double outcome = 0.0;
  double multiplier = 1.0;
  std::vector<double> v;

  double loss(double tau) const {
    const double r = outcome - multiplier * tau;
    return weight * r * r;
  }
};

inline std::vector<double> select_columns(std::span<const double> z,
                                          const std::vector<int>& columns) {
  if (columns.empty()) return {z.begin(), z.end()};
  std::vector<double> v;
  v.reserve(columns.size());
  for (int c : columns) {
    if (c < 0 || static_cast<std::size_t>(c) >= z.size()) {
      throw ArgumentError("effect-modifier column out of range: " + std::to_string(c));
    }
    v.push_back(z[c]);
  }
  return v;
}

// The R loss always uses v = Z; pi is trimmed for both the multiplier and mu~.
inline PseudoObservation r_components(const ObservedRecord& r, const RecordComponents& c,
                                      double floor) {
  const double p = trimmed_propensity(c.pi, floor);
  return {c.v_one, c.v_nu / c.v_one - mu_tilde(p, c.mu1, c.mu0), r.a - p, r.z};
}

inline PseudoObservation dr_components(const ObservedRecord& r, const RecordComponents& c,
                                       double floor, const std::vector<int>& columns = {}) {
  const double p = trimmed_propensity(c.pi, floor);
  const double w = (r.a - p) / (p * (1.0 - p));
  return {c.v_one, w * (c.v_nu / c.v_one - c.mu_a()) + c.mu1 - c.mu0, 1.0,
          select_columns(r.z, columns)};
}

inline PseudoObservation ipw_s_components(const ObservedRecord& r, const RecordComponents& c,
                                          const std::vector<int>& columns = {}) {
  return {r.delta ? c.ipcw : 0.0, c.mu1 - c.mu0, 1.0, select_columns(r.z, columns)};
}

struct PseudoSet {
  std::vector<PseudoObservation> rows;
  std::size_t dropped = 0;  // records with |V(1)| below kMinVOne (R and DR only)
};

inline PseudoSet make_pseudo(const Dataset& data, const std::vector<RecordComponents>& comps,
                             CateLoss loss, double floor, const std::vector<int>& columns = {}) {
  if (comps.size() != data.size()) throw ArgumentError("components do not match the dataset");
  PseudoSet out;
  out.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& c = comps[i];
    if (loss == CateLoss::kIpwS) {
      out.rows.push_back(ipw_s_components(data[i], c, columns));
      continue;
    }
    if (std::abs(c.v_one) < kMinVOne) {
      ++out.dropped;
      continue;
    }
    out.rows.push_back(loss == CateLoss::kR ? r_components(data[i], c, floor)
                                            : dr_components(data[i], c, floor, columns));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Second stage

struct LearnerConfig {
  enum class Kind { kBoostedTrees, kRidgeLinear };
  Kind kind = Kind::kBoostedTrees;
  bool tune = true;            // random search; otherwise `params` as given
  TuningOptions tuning;
  BoostParams params;
  double ridge = 1e-8;         // ridge-linear penalty on slopes

  nlohmann::json to_json() const {
    return {{"kind", kind == Kind::kBoostedTrees ? "boosted_trees" : "ridge_linear"},
            {"tune", tune},
            {"n_search", tuning.n_search},
            {"cv_folds", tuning.folds},
            {"max_trees", tuning.max_trees},
            {"patience", tuning.patience},
            {"params", params.to_json()},
            {"ridge", ridge},
            {"lambda", tuning.lambda}};
  }

  static LearnerConfig from_json(const nlohmann::json& j) {
    LearnerConfig c;
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") {
        const auto k = v.get<std::string>();
        if (k == "boosted_trees") c.kind = Kind::kBoostedTrees;
        else if (k == "ridge_linear") c.kind = Kind::kRidgeLinear;
        else throw SchemaError("unknown learner kind: " + k);
      } else if (key == "tune") c.tune = v.get<bool>();
      else if (key == "n_search") c.tuning.n_search = v.get<int>();
      else if (key == "cv_folds") c.tuning.folds = v.get<int>();
      else if (key == "max_trees") c.tuning.max_trees = v.get<int>();
      else if (key == "patience") c.tuning.patience = v.get<int>();
      else if (key == "params") c.params = BoostParams::from_json(v);
      else if (key == "ridge") c.ridge = v.get<double>();
      else if (key == "lambda") c.tuning.lambda = v.get<double>();
      else throw SchemaError("unknown key in learner config: " + key);
    }
    if (c.tuning.n_search < 1 || c.tuning.folds < 2 || c.tuning.max_trees < 1) {
      throw SchemaError("learner config: need n_search >= 1, cv_folds >= 2, max_trees >= 1");
    }
    return c;
  }
};

class CateModel {
 public:
  LearnerConfig::Kind kind = LearnerConfig::Kind::kBoostedTrees;
  BoostedModel boosted;
  std::vector<double> coef;  // intercept then slopes
  std::vector<int> columns;  // effect-modifier subset of Z; empty = all
  CateLoss loss = CateLoss::kDR;
  std::uint64_t seed = 0;
  std::size_t dropped = 0;
  double training_loss = 0.0;  // omits the tau-free constant, so only orderings are meaningful
  nlohmann::json config;

  double predict_v(std::span<const double> v) const {
    if (kind == LearnerConfig::Kind::kRidgeLinear) {
      if (v.size() + 1 != coef.size()) throw ArgumentError("predict: covariate dimension mismatch");
      double f = coef[0];
      for (std::size_t j = 0; j < v.size(); ++j) f += coef[j + 1] * v[j];
      return f;
    }
    return boosted.predict_raw(v);
  }

  double predict(std::span<const double> z) const {
    const auto v = select_columns(z, columns);
    return predict_v(v);
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"loss", to_string(loss)},
                     {"kind", kind == LearnerConfig::Kind::kBoostedTrees ? "boosted_trees"
                                                                        : "ridge_linear"},
                     {"columns", columns},
                     {"seed", seed},
                     {"dropped", dropped},
                     {"training_loss", training_loss},
                     {"config", config}};
    if (kind == LearnerConfig::Kind::kRidgeLinear) {
      j["coef"] = coef;
    } else {
      j["model"] = boosted.to_json();
    }
    return j;
  }

  static CateModel from_json(const nlohmann::json& j) {
    CateModel m;
    m.loss = parse_cate_loss(j.at("loss").get<std::string>());
    m.kind = j.at("kind").get<std::string>() == "ridge_linear" ? LearnerConfig::Kind::kRidgeLinear
                                                               : LearnerConfig::Kind::kBoostedTrees;
    m.columns = j.at("columns").get<std::vector<int>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dropped = j.value("dropped", std::size_t{0});
    m.training_loss = j.value("training_loss", 0.0);
    m.config = j.value("config", nlohmann::json{});
    if (m.kind == LearnerConfig::Kind::kRidgeLinear) {
      m.coef = j.at("coef").get<std::vector<double>>();
    } else {
      m.boosted = BoostedModel::from_json(j.at("model"));
    }
    return m;
  }
};

inline double pseudo_objective(const std::vector<PseudoObservation>& rows,
                               const std::function<double(const PseudoObservation&)>& tau) {
  double s = 0.0;
  for (const auto& r : rows) s += r.loss(tau(r));
  return s;
}

namespace detail {

inline std::vector<double> fit_ridge_linear(const std::vector<PseudoObservation>& rows,
                                            double ridge) {
  const Eigen::Index d = static_cast<Eigen::Index>(rows.front().v.size()) + 1;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd x(d);
  for (const auto& r : rows) {
    if (static_cast<Eigen::Index>(r.v.size()) + 1 != d) {
      throw ArgumentError("fit_second_stage: ragged covariates");
    }
    x(0) = r.multiplier;
    for (Eigen::Index j = 1; j < d; ++j) x(j) = r.multiplier * r.v[j - 1];
    gram.noalias() += r.weight * x * x.transpose();
    rhs.noalias() += r.weight * r.outcome * x;
  }
  for (Eigen::Index j = 1; j < d; ++j) gram(j, j) += ridge;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw DegenerateError(
        "weighted Gram matrix is not positive definite; increase the ridge penalty");
  }
  const Eigen::VectorXd b = llt.solve(rhs);
  return {b.data(), b.data() + b.size()};
}

inline BoostData boost_data(const std::vector<PseudoObservation>& rows) {
  BoostData d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(rows.front().v.size());
  d.x.resize(n, p);
  d.y.reserve(rows.size());
  d.weight.reserve(rows.size());
  d.multiplier.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.v.size()) != p) {
      throw ArgumentError("fit_second_stage: ragged covariates");
    }
    for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = r.v[static_cast<std::size_t>(j)];
    d.y.push_back(r.outcome);
    d.weight.push_back(r.weight);
    d.multiplier.push_back(r.multiplier);
  }
  return d;
}

}  // namespace detail

inline CateModel fit_second_stage(const std::vector<PseudoObservation>& rows,
                                  const LearnerConfig& cfg, std::uint64_t seed) {
  if (rows.empty()) throw ArgumentError("fit_second_stage: no pseudo-observations");
  for (const auto& r : rows) {
    if (!std::isfinite(r.weight) || !std::isfinite(r.outcome) || !std::isfinite(r.multiplier)) {
      throw NumericError("fit_second_stage: non-finite pseudo-observation");
    }
  }
  if (std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.weight == 0.0; })) {
    throw DegenerateError("fit_second_stage: all weights are zero");
  }
  CateModel m;
  m.kind = cfg.kind;
  m.seed = seed;
  m.config = cfg.to_json();
  if (cfg.kind == LearnerConfig::Kind::kRidgeLinear) {
    if (!(cfg.ridge >= 0.0)) throw ArgumentError("ridge penalty must be nonnegative");
    m.coef = detail::fit_ridge_linear(rows, cfg.ridge);
  } else {
    const BoostData data = detail::boost_data(rows);
    BoostParams p = cfg.params;
    if (cfg.tune) {
      const TuningResult t =
          tune_boosted(data, BoostLoss::kWeightedSquared, cfg.tuning, derive_key(seed, {0x7E}));
      p = t.best;
      m.config["tuned"] = p.to_json();
      m.config["cv_loss"] = t.best_cv_loss;
    }
    m.boosted = fit_boosted(data, BoostLoss::kWeightedSquared, p, derive_key(seed, {0xF1}));
  }
  double s = 0.0;
  for (const auto& r : rows) s += r.loss(m.predict_v(r.v));
  m.training_loss = s;
  return m;
}

// ---------------------------------------------------------------------------
// Cross-fitted pipeline

struct CateFit {
  CateModel model;
  std::size_t trim_event_count = 0;
};

inline CateFit fit_from_components(const Dataset& data, const std::vector<RecordComponents>& comps,
                                   CateLoss loss, double floor, const LearnerConfig& learner,
                                   std::uint64_t seed, const std::vector<int>& columns = {}) {
  const std::vector<int> cols = loss == CateLoss::kR ? std::vector<int>{} : columns;
  PseudoSet ps = make_pseudo(data, comps, loss, floor, cols);
  CateFit out;
  out.model = fit_second_stage(ps.rows, learner, seed);
  out.model.loss = loss;
  out.model.columns = cols;
  out.model.dropped = ps.dropped;
  return out;
}

// Out-of-fold nuisances, fold-matched pseudo-observations, one pooled fit.
// With `oracle` set, that bundle replaces the fold fits for every record.
template <class Nu>
CateFit crossfit_cate(const Dataset& data, CateLoss loss, const SchemeConfig& cfg,
                      const LearnerConfig& learner, std::size_t k, Nu&& nu, std::uint64_t seed,
                      unsigned jobs = 1, const std::vector<int>& columns = {},
                      const NuisanceBundle* oracle = nullptr) {
  require_valid(data);
  std::size_t events = 0;
  std::vector<RecordComponents> comps;
  double floor = cfg.trim_floor;
  if (oracle) {
    TrimCounter counter;
    comps = all_components(data, *oracle, nu, &counter);
    events = counter.events;
    floor = oracle->trim_floor;
  } else {
    const FoldAssignment folds = make_folds(data.size(), k, seed);
    comps = crossfit_components(data, folds, cfg, nu, seed, jobs, &events);
  }
  CateFit out = fit_from_components(data, comps, loss, floor, learner,
                                    derive_key(seed, {0xCA7E}), columns);
  out.trim_event_count = events;
  out.model.config["nuisance"] = oracle ? nlohmann::json("oracle") : cfg.to_json();
  out.model.config["folds"] = oracle ? 0 : k;
  return out;
}

inline double evaluate_mse(const CateModel& model, const Dataset& points,
                           const std::function<double(std::span<const double>)>& truth) {
  if (points.size() == 0) throw ArgumentError("evaluate_mse: no evaluation points");
  double s = 0.0;
  for (const auto& r : points.records) {
    const double e = model.predict(r.z) - truth(r.z);
    s += e * e;
  }
  return s / static_cast<double>(points.size());
}

}  // namespace ltrc

#endif  // LTRC_CATE_HPP
