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

// Weighted, ridge-penalized Cox partial likelihood with left-truncated risk
// sets {j : entry_j < t <= exit_j}, Breslow ties and Breslow baseline.

#ifndef LTRC_COX_HPP
#define LTRC_COX_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ltrc/error.hpp"

namespace ltrc {

struct CoxRows {
  std::vector<double> entry;
  std::vector<double> exit;
  std::vector<int> event;
  std::vector<double> weight;
  Eigen::MatrixXd x;  // n x p

  std::size_t size() const { return exit.size(); }
};

struct CoxOptions {
  double ridge = 0.0;        // penalty (lambda/2) * ||beta||^2 on the fit scale
  bool standardize = false;  // penalize standardized coefficients (glmnet style)
  double tolerance = 1e-8;   // score inf-norm
  int max_iterations = 100;
  double max_beta_norm = 50.0;
  Eigen::VectorXd initial_beta;  // original scale; empty = zeros
};

enum class TimeOrientation { kForward, kReversed };

struct CoxModel {
  Eigen::VectorXd beta;    // original feature scale
  Eigen::VectorXd center;  // lp = beta' (x - center)
  std::vector<double> baseline_times;
  std::vector<double> baseline_hazard_increments;
  double ridge_lambda = 0.0;
  TimeOrientation orientation = TimeOrientation::kForward;
  double pivot = 0.0;  // reversed time s = pivot - t
  std::string feature_description;
  int iterations = 0;
  double gradient_norm = 0.0;   // penalized score inf-norm at beta
  double log_likelihood = 0.0;  // unpenalized
  Eigen::MatrixXd covariance;   // inverse penalized information

  double linear_predictor(const double* x) const {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) lp += beta[j] * (x[j] - center[j]);
    return lp;
  }

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }

  double cumulative_baseline(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < baseline_times.size() && baseline_times[k] <= t; ++k) {
      s += baseline_hazard_increments[k];
    }
    return s;
  }
};

namespace detail {

// Risk-set bookkeeping shared by every likelihood evaluation on one data set.
class CoxRiskSets {
 public:
  explicit CoxRiskSets(const CoxRows& rows) {
    const std::size_t n = rows.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (rows.event[i] && rows.weight[i] > 0.0) times_.push_back(rows.exit[i]);
    }
    std::sort(times_.begin(), times_.end());
    times_.erase(std::unique(times_.begin(), times_.end()), times_.end());
    const std::size_t E = times_.size();
    deaths_.assign(E, 0.0);
    lo_.resize(n);
    hi_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo_[i] = count_le(rows.entry[i]);
      hi_[i] = count_le(rows.exit[i]);
      if (rows.event[i] && rows.weight[i] > 0.0) deaths_[hi_[i] - 1] += rows.weight[i];
    }
  }

  std::size_t count_le(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) -
                                    times_.begin());
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& deaths() const { return deaths_; }
  std::size_t lo(std::size_t i) const { return lo_[i]; }
  std::size_t hi(std::size_t i) const { return hi_[i]; }

  // S0 at each event time for per-row risks r. Accumulated backward from the
  // last event so that right-censored-only data never subtracts.
  std::vector<double> s0(const Eigen::VectorXd& r) const {
    const std::size_t E = times_.size();
    std::vector<double> diff(E + 1, 0.0);
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      if (hi_[i] > lo_[i]) {
        diff[hi_[i] - 1] += r[i];
        if (lo_[i] > 0) diff[lo_[i] - 1] -= r[i];
      }
    }
    std::vector<double> s(E);
    double acc = 0.0;
    for (std::size_t e = E; e-- > 0;) {
      acc += diff[e];
      s[e] = acc;
    }
    return s;
  }

  Eigen::MatrixXd s1(const Eigen::VectorXd& r, const Eigen::MatrixXd& x) const {
    const std::size_t E = times_.size();
    const Eigen::Index p = x.cols();
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(E + 1, p);
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      if (hi_[i] > lo_[i]) {
        diff.row(hi_[i] - 1) += r[i] * x.row(i);
        if (lo_[i] > 0) diff.row(lo_[i] - 1) -= r[i] * x.row(i);
      }
    }
    Eigen::MatrixXd s(E, p);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(p);
    for (std::size_t e = E; e-- > 0;) {
      acc += diff.row(e);
      s.row(e) = acc;
    }
    return s;
  }

 private:
  std::vector<double> times_;
  std::vector<double> deaths_;
  std::vector<std::size_t> lo_;
  std::vector<std::size_t> hi_;
};

struct CoxEval {
  double loglik = 0.0;  // unpenalized
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;  // negative Hessian, unpenalized
  std::vector<double> s0;
};

inline CoxEval cox_evaluate(const CoxRiskSets& risk, const CoxRows& rows,
                            const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                            bool derivatives) {
  const std::size_t n = rows.size();
  const std::size_t E = risk.times().size();
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = rows.weight[i] * std::exp(eta[i]);

  CoxEval out;
  out.s0 = risk.s0(r);
  const auto& d = risk.deaths();
  for (std::size_t i = 0; i < n; ++i) {
    if (rows.event[i] && rows.weight[i] > 0.0) out.loglik += rows.weight[i] * eta[i];
  }
  for (std::size_t e = 0; e < E; ++e) out.loglik -= d[e] * std::log(out.s0[e]);
  if (!derivatives) return out;

  // c_i = sum over event times where i is at risk of d_e / S0_e.
  std::vector<double> cum(E + 1, 0.0);
  for (std::size_t e = 0; e < E; ++e) cum[e + 1] = cum[e] + d[e] / out.s0[e];
  Eigen::VectorXd rc(n);
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    rc[i] = r[i] * (cum[risk.hi(i)] - cum[risk.lo(i)]);
    if (rows.event[i]) ev[i] = rows.weight[i];
  }
  out.gradient = x.transpose() * (ev - rc);

  const Eigen::MatrixXd s1 = risk.s1(r, x);
  Eigen::MatrixXd m(E, x.cols());
  Eigen::VectorXd sqrt_d(E);
  for (std::size_t e = 0; e < E; ++e) {
    m.row(e) = s1.row(e) / out.s0[e];
    sqrt_d[e] = std::sqrt(d[e]);
  }
  const Eigen::MatrixXd xs = x.array().colwise() * rc.array().sqrt();
  const Eigen::MatrixXd ms = m.array().colwise() * sqrt_d.array();
  out.information.noalias() = xs.transpose() * xs;
  out.information.noalias() -= ms.transpose() * ms;
  return out;
}

}  // namespace detail

// Unpenalized log partial likelihood of `rows` at coefficients `beta`
// (original feature scale). Used for cross-validated partial likelihood.
inline double cox_log_partial_likelihood(const CoxRows& rows, const Eigen::VectorXd& beta) {
  detail::CoxRiskSets risk(rows);
  if (risk.times().empty()) return 0.0;
  return detail::cox_evaluate(risk, rows, rows.x, beta, false).loglik;
}

inline CoxModel fit_cox(const CoxRows& rows, const CoxOptions& opt = {}) {
  const std::size_t n = rows.size();
  const Eigen::Index p = rows.x.cols();
  if (rows.entry.size() != n || rows.event.size() != n || rows.weight.size() != n ||
      static_cast<std::size_t>(rows.x.rows()) != n) {
    throw ArgumentError("fit_cox: column lengths differ");
  }
  double total_w = 0.0;
  double event_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rows.entry[i] < rows.exit[i])) {
      throw DomainError("fit_cox: entry must precede exit (row " + std::to_string(i) + ")");
    }
    if (!(rows.weight[i] >= 0.0) || !std::isfinite(rows.weight[i])) {
      throw DomainError("fit_cox: weights must be finite and nonnegative");
    }
    total_w += rows.weight[i];
    if (rows.event[i]) event_w += rows.weight[i];
  }
  if (!(event_w > 0.0)) throw DegenerateError("fit_cox: no events with positive weight");

  // Weighted centering (and optional scaling); constant columns are frozen at 0.
  Eigen::VectorXd center = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  for (std::size_t i = 0; i < n; ++i) center += rows.weight[i] * rows.x.row(i).transpose();
  center /= total_w;
  Eigen::MatrixXd x = rows.x.rowwise() - center.transpose();
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += rows.weight[i] * x(i, j) * x(i, j);
    var /= total_w;
    const double ref = std::max(1.0, std::abs(center[j]));
    if (var > 1e-24 * ref * ref) {
      active.push_back(j);
      if (opt.standardize) scale[j] = std::sqrt(var);
    }
  }
  const Eigen::Index pa = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd xa(n, pa);
  for (Eigen::Index k = 0; k < pa; ++k) xa.col(k) = x.col(active[k]) / scale[active[k]];

  detail::CoxRiskSets risk(rows);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(pa);
  if (opt.initial_beta.size() == p) {
    for (Eigen::Index k = 0; k < pa; ++k) beta[k] = opt.initial_beta[active[k]] * scale[active[k]];
  }
  const double lambda = opt.ridge;
  auto penalized = [&](const detail::CoxEval& ev, const Eigen::VectorXd& b) {
    return ev.loglik - 0.5 * lambda * b.squaredNorm();
  };

  detail::CoxEval ev = detail::cox_evaluate(risk, rows, xa, beta, true);
  double obj = penalized(ev, beta);
  Eigen::VectorXd grad = ev.gradient - lambda * beta;
  int iter = 0;
  auto inf_norm = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  while (inf_norm(grad) >= opt.tolerance) {
    if (iter >= opt.max_iterations) {
      throw ConvergenceError("fit_cox: Newton iterations exhausted", inf_norm(grad));
    }
    ++iter;
    Eigen::MatrixXd info = ev.information;
    info.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= 1e-14 * std::max(1.0, info.diagonal().maxCoeff())).any()) {
      throw ConvergenceError(
          "fit_cox: information matrix is singular; collinear features or no "
          "signal, consider a ridge penalty",
          inf_norm(grad));
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    bool improved = false;
    detail::CoxEval trial;
    Eigen::VectorXd cand;
    for (int h = 0; h < 40; ++h) {
      cand = beta + t * step;
      trial = detail::cox_evaluate(risk, rows, xa, cand, true);
      const double cand_obj = penalized(trial, cand);
      if (std::isfinite(cand_obj) && cand_obj >= obj - 1e-12 * std::abs(obj)) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // Objective flat to machine precision; accept if the score is tiny.
      if (inf_norm(grad) < 1e-6) break;
      throw ConvergenceError("fit_cox: step halving failed", inf_norm(grad));
    }
    const bool stalled = (cand - beta).cwiseAbs().maxCoeff() < 1e-14;
    beta = cand;
    ev = std::move(trial);
    obj = penalized(ev, beta);
    grad = ev.gradient - lambda * beta;
    // Judged on the working (standardized) scale: narrow spline columns carry
    // large raw coefficients without any separation.
    if (beta.norm() > opt.max_beta_norm) {
      throw ConvergenceError(
          "fit_cox: coefficients diverging (||beta|| > " + std::to_string(opt.max_beta_norm) +
              "), likely separation; add a ridge penalty",
          inf_norm(grad));
    }
    if (stalled && inf_norm(grad) < 1e-6) break;
  }

  CoxModel model;
  model.beta = Eigen::VectorXd::Zero(p);
  model.center = center;
  for (Eigen::Index k = 0; k < pa; ++k) model.beta[active[k]] = beta[k] / scale[active[k]];
  model.ridge_lambda = lambda;
  model.iterations = iter;
  model.gradient_norm = inf_norm(grad);
  model.log_likelihood = ev.loglik;
  model.baseline_times = risk.times();
  model.baseline_hazard_increments.resize(risk.times().size());
  for (std::size_t e = 0; e < risk.times().size(); ++e) {
    model.baseline_hazard_increments[e] = risk.deaths()[e] / ev.s0[e];
  }
  model.covariance = Eigen::MatrixXd::Zero(p, p);
  if (pa > 0) {
    Eigen::MatrixXd info = ev.information;
    info.diagonal().array() += lambda;
    const Eigen::MatrixXd inv = info.ldlt().solve(Eigen::MatrixXd::Identity(pa, pa));
    for (Eigen::Index a = 0; a < pa; ++a) {
      for (Eigen::Index b = 0; b < pa; ++b) {
        model.covariance(active[a], active[b]) = inv(a, b) / (scale[active[a]] * scale[active[b]]);
      }
    }
  }
  return model;
}

// Penalized score (original scale, active columns only) at the model's beta;
// used by tests to check the optimality condition.
inline Eigen::VectorXd cox_score(const CoxRows& rows, const CoxModel& model,
                                 const CoxOptions& opt = {}) {
  detail::CoxRiskSets risk(rows);
  const Eigen::MatrixXd x = rows.x.rowwise() - model.center.transpose();
  const auto ev = detail::cox_evaluate(risk, rows, x, model.beta, true);
  Eigen::VectorXd g = ev.gradient;
  if (opt.standardize) {
    // Penalty acts on standardized coefficients: d/dbeta of
    // (lambda/2) sum (beta_j s_j)^2 = lambda s_j^2 beta_j.
    double total_w = 0.0;
    for (double w : rows.weight) total_w += w;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double var = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) var += rows.weight[i] * x(i, j) * x(i, j);
      g[j] -= model.ridge_lambda * (var / total_w) * model.beta[j];
    }
  } else {
    g -= model.ridge_lambda * model.beta;
  }
  return g;
}

}  // namespace ltrc

#endif  // LTRC_COX_HPP
