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

// Weighted logistic regression by IRLS (Newton) with optional ridge.

#ifndef LTRC_LOGISTIC_HPP
#define LTRC_LOGISTIC_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ltrc/error.hpp"

namespace ltrc {

struct LogisticOptions {
  double ridge = 0.0;
  bool penalize_first_column = false;  // first column is usually the intercept
  double tolerance = 1e-8;
  int max_iterations = 100;
  double max_beta_norm = 50.0;
};

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance_model;     // inverse weighted information
  Eigen::MatrixXd covariance_sandwich;  // A^-1 B A^-1, weights treated as known
  int iterations = 0;
  double gradient_norm = 0.0;

  double predict(const double* x) const {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) eta += beta[j] * x[j];
    return 1.0 / (1.0 + std::exp(-eta));
  }
};

inline double expit(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const std::vector<double>& y,
                                const std::vector<double>& w,
                                const LogisticOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
    throw ArgumentError("fit_logistic: column lengths differ");
  }
  double total = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi)) {
      throw DomainError("fit_logistic: weights must be finite and nonnegative");
    }
    total += wi;
  }
  if (!(total > 0.0)) throw DegenerateError("fit_logistic: all weights are zero");

  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, opt.ridge);
  if (p > 0 && !opt.penalize_first_column) penalty[0] = 0.0;
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);

  auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // y*eta - log(1 + e^eta), evaluated stably
      const double e = eta[i];
      const double log1pe = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += wv[i] * (yv[i] * e - log1pe);
    }
    return ll - 0.5 * (penalty.array() * b.array().square()).sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd prob(n);
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd info(p, p);
  auto derivatives = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = x * b;
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(eta[i]);
    grad = x.transpose() * (wv.array() * (yv - prob).array()).matrix() -
           (penalty.array() * b.array()).matrix();
    const Eigen::VectorXd curv = wv.array() * prob.array() * (1.0 - prob.array());
    const Eigen::MatrixXd xs = x.array().colwise() * curv.array().sqrt();
    info.noalias() = xs.transpose() * xs;
    info.diagonal() += penalty;
  };

  derivatives(beta);
  double obj = objective(beta);
  int iter = 0;
  auto inf_norm = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  while (inf_norm(grad) >= opt.tolerance) {
    if (iter >= opt.max_iterations) {
      throw ConvergenceError("fit_logistic: IRLS iterations exhausted; consider a ridge penalty",
                             inf_norm(grad));
    }
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= 1e-14 * std::max(1.0, info.diagonal().maxCoeff())).any()) {
      throw ConvergenceError("fit_logistic: singular information; consider a ridge penalty",
                             inf_norm(grad));
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd cand;
    double cand_obj = obj;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      cand = beta + t * step;
      cand_obj = objective(cand);
      if (std::isfinite(cand_obj) && cand_obj >= obj - 1e-12 * std::abs(obj)) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      if (inf_norm(grad) < 1e-6) break;
      throw ConvergenceError("fit_logistic: step halving failed", inf_norm(grad));
    }
    const bool stalled = (cand - beta).cwiseAbs().maxCoeff() < 1e-14;
    beta = cand;
    obj = cand_obj;
    derivatives(beta);
    if (beta.norm() > opt.max_beta_norm) {
      throw ConvergenceError(
          "fit_logistic: coefficients diverging (separation); add a ridge penalty",
          inf_norm(grad));
    }
    if (stalled && inf_norm(grad) < 1e-6) break;
  }

  LogisticFit fit;
  fit.beta = beta;
  fit.iterations = iter;
  fit.gradient_norm = inf_norm(grad);
  const Eigen::MatrixXd a_inv = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance_model = a_inv;
  const Eigen::VectorXd s = wv.array() * (yv - prob).array();
  const Eigen::MatrixXd xs = x.array().colwise() * s.array();
  const Eigen::MatrixXd meat = xs.transpose() * xs;
  fit.covariance_sandwich = a_inv * meat * a_inv;
  return fit;
}

}  // namespace ltrc

#endif  // LTRC_LOGISTIC_HPP
