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

// Histogram gradient-boosted trees with second-order (Newton) leaves.
//
// Two losses are supported:
//   weighted squared  sum_i w_i (y_i - m_i f(x_i))^2, weights of either sign;
//   logistic          sum_i w_i [log(1 + e^f) - y_i f], y in {0, 1}.
// Leaves with curvature sum at or below kCurvatureFloor get value 0, and a
// round whose tree increases the training objective is discarded.

#ifndef LTRC_GBDT_HPP
#define LTRC_GBDT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "json.hpp"
#include "ltrc/error.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/rng.hpp"

namespace ltrc {

inline constexpr double kCurvatureFloor = 1e-8;

enum class BoostLoss { kWeightedSquared, kLogistic };

struct BoostParams {
  int n_trees = 100;
  int max_depth = 3;
  double eta = 0.1;
  double subsample = 1.0;
  double colsample = 1.0;
  double gamma = 0.0;             // minimum split gain
  double min_child_weight = 0.0;  // minimum curvature sum per child
  int min_child_count = 1;
  double max_delta_step = 0.0;    // 0 = unconstrained
  double lambda = 1.0;            // L2 on leaf values, at least 1e-6
  int max_bins = 256;

  nlohmann::json to_json() const {
    return {{"n_trees", n_trees},     {"max_depth", max_depth},
            {"eta", eta},             {"subsample", subsample},
            {"colsample", colsample}, {"gamma", gamma},
            {"min_child_weight", min_child_weight},
            {"min_child_count", min_child_count},
            {"max_delta_step", max_delta_step},
            {"lambda", lambda},       {"max_bins", max_bins}};
  }

  static BoostParams from_json(const nlohmann::json& j) {
    BoostParams p;
    for (const auto& [key, v] : j.items()) {
      if (key == "n_trees") p.n_trees = v.get<int>();
      else if (key == "max_depth") p.max_depth = v.get<int>();
      else if (key == "eta") p.eta = v.get<double>();
      else if (key == "subsample") p.subsample = v.get<double>();
      else if (key == "colsample") p.colsample = v.get<double>();
      else if (key == "gamma") p.gamma = v.get<double>();
      else if (key == "min_child_weight") p.min_child_weight = v.get<double>();
      else if (key == "min_child_count") p.min_child_count = v.get<int>();
      else if (key == "max_delta_step") p.max_delta_step = v.get<double>();
      else if (key == "lambda") p.lambda = v.get<double>();
      else if (key == "max_bins") p.max_bins = v.get<int>();
      else throw SchemaError("unknown boosting parameter: " + key);
    }
    return p;
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  template <class Row>
  double predict(const Row& x) const {
    int k = 0;
    while (nodes[k].feature >= 0) {
      k = x[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    }
    return nodes[k].value;
  }

  nlohmann::json node_json(int k) const {
    const auto& n = nodes[k];
    if (n.feature < 0) return {{"leaf", n.value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", node_json(n.left)},
            {"right", node_json(n.right)}};
  }

  nlohmann::json to_json() const { return node_json(0); }

  static Tree from_json(const nlohmann::json& j) {
    Tree t;
    t.add_json(j);
    return t;
  }

 private:
  int add_json(const nlohmann::json& j) {
    const int k = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (j.contains("leaf")) {
      nodes[k].value = j.at("leaf").get<double>();
      return k;
    }
    nodes[k].feature = j.at("feature").get<int>();
    nodes[k].threshold = j.at("threshold").get<double>();
    const int l = add_json(j.at("left"));
    const int r = add_json(j.at("right"));
    nodes[k].left = l;
    nodes[k].right = r;
    return k;
  }
};

class BoostedModel {
 public:
  BoostLoss loss = BoostLoss::kWeightedSquared;
  double base_score = 0.0;
  std::vector<Tree> trees;
  BoostParams params;
  std::uint64_t seed = 0;
  int rejected_rounds = 0;

  // Raw score f(x): tau for the squared loss, log-odds for the logistic.
  template <class Row>
  double predict_raw(const Row& x) const {
    double f = base_score;
    for (const auto& t : trees) f += t.predict(x);
    return f;
  }

  double predict_raw_row(const Eigen::MatrixXd& x, Eigen::Index i) const {
    return predict_raw(x.row(i));
  }

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& tree : trees) t.push_back(tree.to_json());
    return {{"loss", loss == BoostLoss::kLogistic ? "logistic" : "weighted_squared"},
            {"base_score", base_score},
            {"params", params.to_json()},
            {"seed", seed},
            {"rejected_rounds", rejected_rounds},
            {"trees", t}};
  }

  static BoostedModel from_json(const nlohmann::json& j) {
    BoostedModel m;
    m.loss = j.at("loss").get<std::string>() == "logistic" ? BoostLoss::kLogistic
                                                           : BoostLoss::kWeightedSquared;
    m.base_score = j.at("base_score").get<double>();
    m.params = BoostParams::from_json(j.at("params"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.rejected_rounds = j.value("rejected_rounds", 0);
    for (const auto& t : j.at("trees")) m.trees.push_back(Tree::from_json(t));
    return m;
  }
};

// Training data. For the logistic loss `multiplier` is ignored and `y` is 0/1.
struct BoostData {
  Eigen::MatrixXd x;  // n x d
  std::vector<double> y;
  std::vector<double> weight;
  std::vector<double> multiplier;

  std::size_t size() const { return y.size(); }

  BoostData subset(const std::vector<std::size_t>& idx) const {
    BoostData out;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
      out.y.push_back(y[idx[k]]);
      out.weight.push_back(weight[idx[k]]);
      out.multiplier.push_back(multiplier.empty() ? 1.0 : multiplier[idx[k]]);
    }
    return out;
  }
};

namespace detail {

inline double loss_term(BoostLoss loss, double y, double w, double m, double f) {
  if (loss == BoostLoss::kWeightedSquared) {
    const double r = y - m * f;
    return w * r * r;
  }
  const double log1pe = f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
  return w * (log1pe - y * f);
}

inline void grad_hess(BoostLoss loss, double y, double w, double m, double f, double& g,
                      double& h) {
  if (loss == BoostLoss::kWeightedSquared) {
    g = -2.0 * w * m * (y - m * f);
    h = 2.0 * w * m * m;
    return;
  }
  const double p = f >= 0 ? 1.0 / (1.0 + std::exp(-f)) : std::exp(f) / (1.0 + std::exp(f));
  g = w * (p - y);
  h = w * p * (1.0 - p);
}

// Per-feature quantile cut points and per-row bin indices.
class Binner {
 public:
  Binner(const Eigen::MatrixXd& x, int max_bins) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    cuts_.resize(d);
    bins_.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      std::vector<double> v(x.col(j).data(), x.col(j).data() + n);
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      auto& c = cuts_[j];
      if (static_cast<int>(v.size()) <= max_bins) {
        c = v;
      } else {
        for (int b = 1; b <= max_bins; ++b) {
          const std::size_t k = std::min(v.size() - 1, (v.size() * b) / max_bins);
          c.push_back(v[k == 0 ? 0 : k - 1]);
        }
        c.back() = v.back();
        c.erase(std::unique(c.begin(), c.end()), c.end());
      }
      bins_[j].resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        bins_[j][i] = static_cast<std::uint16_t>(
            std::lower_bound(c.begin(), c.end(), x(i, j)) - c.begin());
      }
    }
  }

  std::size_t n_bins(Eigen::Index j) const { return cuts_[j].size(); }
  std::uint16_t bin(Eigen::Index j, std::size_t i) const { return bins_[j][i]; }
  double cut(Eigen::Index j, std::size_t b) const { return cuts_[j][b]; }
  Eigen::Index n_features() const { return static_cast<Eigen::Index>(cuts_.size()); }

 private:
  std::vector<std::vector<double>> cuts_;
  std::vector<std::vector<std::uint16_t>> bins_;
};

inline double leaf_score(double g, double h, double lambda) {
  return h > kCurvatureFloor ? g * g / (h + lambda) : 0.0;
}

inline double leaf_value(double g, double h, const BoostParams& p) {
  if (!(h > kCurvatureFloor)) return 0.0;
  double v = -g / (h + p.lambda);
  if (p.max_delta_step > 0.0) v = std::clamp(v, -p.max_delta_step, p.max_delta_step);
  return p.eta * v;
}

class TreeBuilder {
 public:
  TreeBuilder(const Binner& binner, const std::vector<double>& g, const std::vector<double>& h,
              const BoostParams& p, std::vector<Eigen::Index> features)
      : binner_(binner), g_(g), h_(h), p_(p), features_(std::move(features)) {}

  Tree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int k = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double G = 0.0, H = 0.0;
    for (auto i : rows) {
      G += g_[i];
      H += h_[i];
    }
    tree_.nodes[k].value = leaf_value(G, H, p_);
    if (depth >= p_.max_depth || rows.size() < 2) return k;

    const double parent = leaf_score(G, H, p_.lambda);
    double best_gain = std::max(p_.gamma, 1e-12);
    Eigen::Index best_f = -1;
    std::size_t best_b = 0;
    for (Eigen::Index f : features_) {
      const std::size_t nb = binner_.n_bins(f);
      if (nb < 2) continue;
      hg_.assign(nb, 0.0);
      hh_.assign(nb, 0.0);
      hc_.assign(nb, 0);
      for (auto i : rows) {
        const auto b = binner_.bin(f, i);
        hg_[b] += g_[i];
        hh_[b] += h_[i];
        ++hc_[b];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hg_[b];
        hl += hh_[b];
        cl += hc_[b];
        const std::size_t cr = rows.size() - cl;
        if (cl < static_cast<std::size_t>(p_.min_child_count)) continue;
        if (cr < static_cast<std::size_t>(p_.min_child_count)) break;
        const double hr = H - hl;
        if (hl < p_.min_child_weight || hr < p_.min_child_weight) continue;
        const double gain =
            leaf_score(gl, hl, p_.lambda) + leaf_score(G - gl, hr, p_.lambda) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_b = b;
        }
      }
    }
    if (best_f < 0) return k;

    std::vector<std::size_t> left, right;
    for (auto i : rows) (binner_.bin(best_f, i) <= best_b ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[k].feature = static_cast<int>(best_f);
    tree_.nodes[k].threshold = binner_.cut(best_f, best_b);
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[k].left = l;
    tree_.nodes[k].right = r;
    return k;
  }

  const Binner& binner_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  const BoostParams& p_;
  std::vector<Eigen::Index> features_;
  Tree tree_;
  std::vector<double> hg_, hh_;
  std::vector<std::size_t> hc_;
};

}  // namespace detail

// Optional per-round validation trace: after each round the validation loss
// sum is appended to `trace`. With patience > 0 training stops once that many
// rounds pass without improving the best validation loss.
struct BoostValidation {
  const BoostData* data = nullptr;
  std::vector<double>* trace = nullptr;
  int patience = 0;
};

inline double boost_objective(const BoostedModel& model, const BoostData& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double m = data.multiplier.empty() ? 1.0 : data.multiplier[i];
    s += detail::loss_term(model.loss, data.y[i], data.weight[i], m,
                           model.predict_raw_row(data.x, static_cast<Eigen::Index>(i)));
  }
  return s;
}

inline BoostedModel fit_boosted(const BoostData& data, BoostLoss loss, const BoostParams& p,
                                std::uint64_t seed, BoostValidation validation = {}) {
  const std::size_t n = data.size();
  if (n == 0) throw ArgumentError("fit_boosted: empty training data");
  if (static_cast<std::size_t>(data.x.rows()) != n || data.weight.size() != n ||
      (!data.multiplier.empty() && data.multiplier.size() != n)) {
    throw ArgumentError("fit_boosted: column lengths differ");
  }
  if (std::all_of(data.weight.begin(), data.weight.end(), [](double w) { return w == 0.0; })) {
    throw DegenerateError("fit_boosted: all weights are zero");
  }
  if (!(p.lambda >= 1e-6)) throw ArgumentError("fit_boosted: lambda must be >= 1e-6");
  if (!(p.subsample > 0.0 && p.subsample <= 1.0) || !(p.colsample > 0.0 && p.colsample <= 1.0)) {
    throw ArgumentError("fit_boosted: subsample and colsample must lie in (0, 1]");
  }
  if (p.max_depth < 0 || p.n_trees < 0 || !(p.eta > 0.0)) {
    throw ArgumentError("fit_boosted: invalid depth, tree count or learning rate");
  }

  BoostedModel model;
  model.loss = loss;
  model.params = p;
  model.seed = seed;
  if (loss == BoostLoss::kLogistic) {
    double sw = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sw += data.weight[i];
      sy += data.weight[i] * data.y[i];
    }
    const double mean = std::clamp(sy / sw, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(mean / (1.0 - mean));
  }

  const detail::Binner binner(data.x, p.max_bins);
  const Eigen::Index d = data.x.cols();
  std::vector<double> f(n, model.base_score);
  std::vector<double> g(n), h(n);
  auto mult = [&](std::size_t i) { return data.multiplier.empty() ? 1.0 : data.multiplier[i]; };
  auto objective = [&](const std::vector<double>& score) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += detail::loss_term(loss, data.y[i], data.weight[i], mult(i), score[i]);
    }
    return s;
  };
  double obj = objective(f);

  std::vector<double> vf;
  if (validation.data) {
    vf.assign(validation.data->size(), model.base_score);
    validation.trace->clear();
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<Eigen::Index> all_features(static_cast<std::size_t>(d));
  std::iota(all_features.begin(), all_features.end(), Eigen::Index{0});
  const std::size_t n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p.subsample * n)));
  const std::size_t n_col = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p.colsample * d)));
  std::vector<double> trial(n);
  double best_valid = std::numeric_limits<double>::infinity();
  int best_round = -1;

  for (int round = 0; round < p.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      detail::grad_hess(loss, data.y[i], data.weight[i], mult(i), f[i], g[i], h[i]);
    }
    CounterRng rng(derive_key(seed, {0xB005, static_cast<std::uint64_t>(round)}));
    std::vector<std::size_t> rows = all;
    if (n_sub < n) {
      for (std::size_t k = 0; k < n_sub; ++k) std::swap(rows[k], rows[k + rng.below(n - k)]);
      rows.resize(n_sub);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<Eigen::Index> cols = all_features;
    if (n_col < cols.size()) {
      for (std::size_t k = 0; k < n_col; ++k) {
        std::swap(cols[k], cols[k + rng.below(cols.size() - k)]);
      }
      cols.resize(n_col);
      std::sort(cols.begin(), cols.end());
    }
    detail::TreeBuilder builder(binner, g, h, p, cols);
    Tree tree = builder.build(std::move(rows));

    for (std::size_t i = 0; i < n; ++i) {
      trial[i] = f[i] + tree.predict(data.x.row(static_cast<Eigen::Index>(i)));
    }
    const double trial_obj = objective(trial);
    if (trial_obj <= obj) {
      obj = trial_obj;
      f.swap(trial);
      if (validation.data) {
        for (std::size_t i = 0; i < vf.size(); ++i) {
          vf[i] += tree.predict(validation.data->x.row(static_cast<Eigen::Index>(i)));
        }
      }
      model.trees.push_back(std::move(tree));
    } else {
      ++model.rejected_rounds;
    }
    if (validation.data) {
      const BoostData& v = *validation.data;
      double s = 0.0;
      for (std::size_t i = 0; i < vf.size(); ++i) {
        s += detail::loss_term(loss, v.y[i], v.weight[i],
                               v.multiplier.empty() ? 1.0 : v.multiplier[i], vf[i]);
      }
      validation.trace->push_back(s);
      if (s < best_valid) {
        best_valid = s;
        best_round = round;
      } else if (validation.patience > 0 && round - best_round >= validation.patience) {
        break;
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Random-search tuning with K-fold cross-validated loss over tree counts.

struct TuningGrid {
  std::vector<double> subsample{0.5, 0.7, 0.9};
  std::vector<double> colsample{0.6, 0.8, 1.0};
  std::vector<double> eta{0.001, 0.005, 0.01, 0.02, 0.05, 0.08, 0.1};
  std::vector<int> max_depth{2, 3, 4, 5, 6};
  std::vector<double> gamma{0, 0.5, 1, 2, 3, 5};
  std::vector<double> min_child_weight{10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::vector<double> max_delta_step{0, 2, 4, 6, 8, 10};
};

struct TuningOptions {
  int n_search = 50;
  int folds = 10;
  int max_trees = 1000;
  int patience = 0;  // stop a fold early after this many rounds without improvement; 0 = off
  double lambda = 1.0;
  unsigned jobs = 1;  // candidates evaluated in parallel
  TuningGrid grid;
};

struct TuningResult {
  BoostParams best;
  double best_cv_loss = std::numeric_limits<double>::infinity();
  std::vector<std::pair<BoostParams, double>> candidates;
};

inline TuningResult tune_boosted(const BoostData& data, BoostLoss loss, const TuningOptions& opt,
                                 std::uint64_t seed) {
  const std::size_t n = data.size();
  const int k = std::min<int>(opt.folds, static_cast<int>(n));
  if (k < 2) throw ArgumentError("tune_boosted: need at least two CV folds");
  // Fold labels: permutation then round-robin.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng frng(derive_key(seed, {0xCF01D}));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[frng.below(i)]);
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[perm[i]] = static_cast<int>(i % k);
  std::vector<BoostData> train(k), valid(k);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < n; ++i) (label[i] == f ? va : tr).push_back(i);
    train[f] = data.subset(tr);
    valid[f] = data.subset(va);
  }

  // Candidates are drawn up front so results do not depend on `jobs`.
  const auto& g = opt.grid;
  CounterRng rng(derive_key(seed, {0x5EA4C4}));
  auto pick = [&](const auto& v) { return v[rng.below(v.size())]; };
  std::vector<BoostParams> cand(static_cast<std::size_t>(std::max(opt.n_search, 0)));
  for (auto& p : cand) {
    p.subsample = pick(g.subsample);
    p.colsample = pick(g.colsample);
    p.eta = pick(g.eta);
    p.max_depth = pick(g.max_depth);
    p.gamma = pick(g.gamma);
    p.min_child_weight = pick(g.min_child_weight);
    p.max_delta_step = pick(g.max_delta_step);
    p.lambda = opt.lambda;
    p.n_trees = opt.max_trees;
  }
  std::vector<double> cv_loss(cand.size());
  parallel_for(cand.size(), opt.jobs, [&](std::size_t s) {
    BoostParams& p = cand[s];
    std::vector<double> total(opt.max_trees, 0.0);
    std::vector<double> trace;
    for (int f = 0; f < k; ++f) {
      const auto fold_seed = derive_key(seed, {s, static_cast<std::uint64_t>(f)});
      fit_boosted(train[f], loss, p, fold_seed, {&valid[f], &trace, opt.patience});
      // A fold stopped early keeps its last loss for the remaining counts.
      for (int r = 0; r < opt.max_trees; ++r) {
        total[r] += trace[std::min<std::size_t>(r, trace.size() - 1)];
      }
    }
    int best_r = 0;
    for (int r = 1; r < opt.max_trees; ++r) {
      if (total[r] < total[best_r]) best_r = r;
    }
    p.n_trees = best_r + 1;
    cv_loss[s] = total[best_r] / static_cast<double>(n);
  });
  TuningResult result;
  for (std::size_t s = 0; s < cand.size(); ++s) {
    result.candidates.emplace_back(cand[s], cv_loss[s]);
    if (cv_loss[s] < result.best_cv_loss) {
      result.best_cv_loss = cv_loss[s];
      result.best = cand[s];
    }
  }
  return result;
}

}  // namespace ltrc

#endif  // LTRC_GBDT_HPP
