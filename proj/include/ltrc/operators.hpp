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

// LTRC operators V_Q, V_C and V = V_C o V_Q evaluated as exact finite
// Stieltjes sums over step-function nuisances.
//
// Conventions for one record (Q, X, Delta, A, Z), with x~ = X - Q and
// trim(p) = max(p, floor):
//   NP(v)   = sum_{t_k <= v} nu(t_k) dF_k
//   k(v)    = NP(v) / trim(1 - F(v))
//   dMbar_Q = -(unit mass at Q) + 1(Q <= v < T) dG(v) / G(v)
//   dM_D    = (1 - Delta)(unit mass at x~) - 1(u <= x~) dLambda_D(u),
//             dLambda_D at jump j equal to 1 - S_j / S_{j-1},
// so that the integral of dM_D / S_D telescopes to 1 - Delta / S_D(x~).

#ifndef LTRC_OPERATORS_HPP
#define LTRC_OPERATORS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ltrc/data.hpp"
#include "ltrc/error.hpp"
#include "ltrc/nuisance.hpp"
#include "ltrc/step.hpp"

namespace ltrc {

// Counts denominators that hit the trim floor.
struct TrimCounter {
  std::size_t events = 0;
};

inline double trim_counted(double p, double floor, TrimCounter* counter) {
  const double t = trim_probability(p, floor);
  if (counter && p < floor) ++counter->events;
  return t;
}

// ---------------------------------------------------------------------------
// Conditional means under a step CDF

template <class Nu>
double mu(const StepFunction& f, Nu&& nu) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += nu(f.times[k]) * f.increment(k);
  const double mass = f.last() - f.initial;
  if (!(mass > 0.0)) throw DegenerateError("mu: distribution has zero total mass");
  return mass < 1.0 ? s / mass : s;
}

inline double mu_tilde(double pi, double mu1, double mu0) { return mu1 * pi + mu0 * (1.0 - pi); }

// E{nu(T) | T <= v}.
template <class Nu>
double m_lower(const StepFunction& f, Nu&& nu, double v) {
  const double fv = f(v);
  if (!(fv > 0.0)) throw DomainError("m_lower: F(v) = 0 below the first jump");
  double s = 0.0;
  const std::size_t n = f.count_le(v);
  for (std::size_t k = 0; k < n; ++k) s += nu(f.times[k]) * f.increment(k);
  return s / fv;
}

// E{nu(T) | T > q + u} with a trimmed denominator.
template <class Nu>
double m_upper(const StepFunction& f, Nu&& nu, double u, double q, double floor,
               TrimCounter* counter = nullptr) {
  const double c = q + u;
  double s = 0.0;
  for (std::size_t k = f.count_le(c); k < f.size(); ++k) s += nu(f.times[k]) * f.increment(k);
  return s / trim_counted(1.0 - f(c), floor, counter);
}

// ---------------------------------------------------------------------------
// Discretization carrier for one record, on the calendar time scale.
// S_D jumps u are shifted to Q + u; only points inside the integration
// limits are kept (G at or after Q, S_D up to X).

struct StieltjesGrid {
  std::vector<double> jump_times;
  std::vector<double> d_f;
  std::vector<double> d_g;
  std::vector<double> d_inv_sd;
};

inline StieltjesGrid make_stieltjes_grid(const ObservedRecord& r, const StepFunction& f,
                                         const StepFunction& g, const StepFunction& sd,
                                         double floor) {
  StieltjesGrid grid;
  auto& t = grid.jump_times;
  t.insert(t.end(), f.times.begin(), f.times.end());
  for (double v : g.times) {
    if (v >= r.q) t.push_back(v);
  }
  for (double u : sd.times) {
    if (u <= r.x - r.q) t.push_back(r.q + u);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  auto inv = [&](double u) { return 1.0 / trim_probability(sd(u), floor); };
  auto inv_left = [&](double u) { return 1.0 / trim_probability(sd.left_limit(u), floor); };
  for (double v : t) {
    grid.d_f.push_back(f(v) - f.left_limit(v));
    grid.d_g.push_back(g(v) - g.left_limit(v));
    grid.d_inv_sd.push_back(inv(v - r.q) - inv_left(v - r.q));
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Closed form of V(nu) and V(1)

struct VPair {
  double v_nu = 0.0;
  double v_one = 0.0;
};

struct RecordNuisance {
  StepFunction f;   // F(. | A, Z)
  StepFunction g;   // G(. | A, Z)
  StepFunction sd;  // S_D(. | Q, A, Z)
};

inline RecordNuisance evaluate_nuisance(const ObservedRecord& r, const NuisanceBundle& b) {
  if (b.f.empty() || b.g.empty() || b.sd.empty()) {
    throw ArgumentError("operator inputs: nuisance bundle is incomplete");
  }
  const Subject s{r.q, r.a, r.z};
  return {b.f.evaluate(s), b.g.evaluate(s), b.sd.evaluate(s)};
}

namespace detail {

inline void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in operator term ") + term);
}

}  // namespace detail

// Channel 0 uses nu, channel 1 uses nu == 1; both share one pass.
template <class Nu>
VPair v_closed_form(const ObservedRecord& r, const RecordNuisance& n, Nu&& nu, double floor,
                    TrimCounter* counter = nullptr) {
  constexpr int C = 2;
  using Vec = std::array<double, C>;
  const StepFunction& F = n.f;
  const StepFunction& G = n.g;
  const StepFunction& S = n.sd;
  const double Q = r.q;
  const double X = r.x;
  const double xt = X - Q;
  auto tr = [&](double p) { return trim_counted(p, floor, counter); };

  // F side: prefix NP(v) and suffix of nu dF / trim(G) over jumps.
  const std::size_t K = F.size();
  std::vector<Vec> np(K + 1, Vec{0.0, 0.0});   // np[k] = sum over first k jumps
  std::vector<Vec> a2(K + 1, Vec{0.0, 0.0});   // a2[k] = sum over jumps k..K-1
  std::vector<double> nu_t(K);
  for (std::size_t k = 0; k < K; ++k) {
    nu_t[k] = nu(F.times[k]);
    const double df = F.increment(k);
    np[k + 1] = {np[k][0] + nu_t[k] * df, np[k][1] + df};
  }
  // Only jumps after Q enter term (ii); earlier ones would add spurious trim events.
  const std::size_t kq0 = F.count_le(Q);
  for (std::size_t k = K; k-- > kq0;) {
    const double w = F.increment(k) / tr(G(F.times[k]));
    a2[k] = {a2[k + 1][0] + nu_t[k] * w, a2[k + 1][1] + w};
  }
  auto np_at = [&](double v) { return np[F.count_le(v)]; };

  // G side over jumps v_l >= Q: c_l (prefix) and e_l (suffix).
  const std::size_t l0 = static_cast<std::size_t>(
      std::lower_bound(G.times.begin(), G.times.end(), Q) - G.times.begin());
  const std::size_t L = G.size();
  std::vector<Vec> cpre(L - l0 + 1, Vec{0.0, 0.0});
  std::vector<Vec> esuf(L - l0 + 1, Vec{0.0, 0.0});
  std::vector<Vec> cl(L - l0), el(L - l0);
  for (std::size_t l = l0; l < L; ++l) {
    const double v = G.times[l];
    const double gv = tr(G.values[l]);
    const double dg = G.increment(l) / (gv * gv);
    const double surv = 1.0 - F(v);
    const double tsurv = tr(surv);
    const Vec p = np_at(v);
    for (int c = 0; c < C; ++c) {
      cl[l - l0][c] = p[c] / tsurv * dg;
      el[l - l0][c] = p[c] / tsurv * surv * dg;
    }
  }
  for (std::size_t i = 0; i < cl.size(); ++i) {
    for (int c = 0; c < C; ++c) cpre[i + 1][c] = cpre[i][c] + cl[i][c];
  }
  for (std::size_t i = el.size(); i-- > 0;) {
    for (int c = 0; c < C; ++c) esuf[i][c] = esuf[i + 1][c] + el[i][c];
  }
  // Index (relative to l0) of the first G jump at or after time t.
  auto g_first_ge = [&](double t) {
    return static_cast<std::size_t>(
               std::lower_bound(G.times.begin() + static_cast<std::ptrdiff_t>(l0), G.times.end(), t) -
               G.times.begin()) - l0;
  };

  const Vec npq = np_at(Q);
  const double gq = tr(G(Q));
  const double sq = tr(1.0 - F(Q));
  Vec kq;
  for (int c = 0; c < C; ++c) kq[c] = npq[c] / sq / gq;

  // Term (i): Delta / S_D(x~) times the V_Q value at T = X.
  const double sx = tr(S(xt));
  const double ratio = r.delta / sx;
  const Vec c_to_x = cpre[g_first_ge(X)];
  const double gx = tr(G(X));
  Vec t1;
  t1[0] = ratio * (nu(X) / gx + kq[0] - c_to_x[0]);
  t1[1] = ratio * (1.0 / gx + kq[1] - c_to_x[1]);

  // Terms (ii), (iv), (v): integral against dM_D / S_D.
  Vec t245{0.0, 0.0};
  auto add_atom = [&](double u, double w) {
    if (w == 0.0) return;
    const double c = Q + u;
    const std::size_t kc = F.count_le(c);
    const double tsurv = tr(1.0 - F(c));
    const std::size_t split = g_first_ge(c);
    const Vec& lower = cpre[split];
    const Vec& upper = esuf[split];
    for (int ch = 0; ch < C; ++ch) {
      const double a2v = a2[kc][ch] / tsurv;
      const double a45 = lower[ch] + upper[ch] / tsurv;
      t245[ch] += w * (a2v - a45);
    }
  };
  const std::size_t J = S.count_le(xt);
  for (std::size_t j = 0; j < J; ++j) {
    const double prev = S.before(j);
    const double cur = S.values[j];
    const double dlam = prev > 0.0 ? 1.0 - cur / prev : 0.0;
    add_atom(S.times[j], -dlam / tr(cur));
  }
  add_atom(xt, (1.0 - r.delta) / sx);

  // Term (iii).
  Vec t3;
  for (int c = 0; c < C; ++c) t3[c] = (1.0 - ratio) * kq[c];

  VPair out{t1[0] + t245[0] + t3[0], t1[1] + t245[1] + t3[1]};
  detail::require_finite(t1[0] + t1[1], "(i)");
  detail::require_finite(t245[0] + t245[1], "(ii)-(v)");
  detail::require_finite(t3[0] + t3[1], "(iii)");
  return out;
}

template <class Nu>
double v_nu(const ObservedRecord& r, const NuisanceBundle& b, Nu&& nu,
            TrimCounter* counter = nullptr) {
  return v_closed_form(r, evaluate_nuisance(r, b), nu, b.trim_floor, counter).v_nu;
}

inline double v_one(const ObservedRecord& r, const NuisanceBundle& b,
                    TrimCounter* counter = nullptr) {
  return v_closed_form(r, evaluate_nuisance(r, b), [](double) { return 1.0; }, b.trim_floor,
                       counter)
      .v_one;
}

// ---------------------------------------------------------------------------
// Direct operator definitions; O(J K L) and used to cross-check the closed form.

// V_Q(zeta)(q, t) for fixed (A, Z).
template <class Zeta>
double v_q_general(Zeta&& zeta, double q, double t, const StepFunction& F, const StepFunction& G,
                   double floor) {
  auto k_of = [&](double v) {
    double s = 0.0;
    for (std::size_t k = 0; k < F.count_le(v); ++k) s += zeta(F.times[k]) * F.increment(k);
    return s / trim_probability(1.0 - F(v), floor);
  };
  double out = zeta(t) / trim_probability(G(t), floor);
  // Unit negative mass of dMbar_Q at Q.
  out += k_of(q) / trim_probability(G(q), floor);
  for (std::size_t l = 0; l < G.size(); ++l) {
    const double v = G.times[l];
    if (v < q || v >= t) continue;
    const double gv = trim_probability(G.values[l], floor);
    out -= k_of(v) * G.increment(l) / (gv * gv);
  }
  return out;
}

// V_C(xi) for one observed record; xi(q, t).
template <class Xi>
double v_c_general(Xi&& xi, const ObservedRecord& r, const StepFunction& F,
                   const StepFunction& S, double floor) {
  const double xt = r.x - r.q;
  auto m_bar = [&](double u) {
    const double c = r.q + u;
    double s = 0.0;
    for (std::size_t k = F.count_le(c); k < F.size(); ++k) {
      s += xi(r.q, F.times[k]) * F.increment(k);
    }
    return s / trim_probability(1.0 - F(c), floor);
  };
  const double sx = trim_probability(S(xt), floor);
  double out = r.delta ? xi(r.q, r.x) / sx : 0.0;
  for (std::size_t j = 0; j < S.size() && S.times[j] <= xt; ++j) {
    const double prev = S.before(j);
    const double dlam = prev > 0.0 ? 1.0 - S.values[j] / prev : 0.0;
    out -= m_bar(S.times[j]) * dlam / trim_probability(S.values[j], floor);
  }
  if (r.delta == 0) out += m_bar(xt) / sx;
  return out;
}

// V(zeta) = V_C(V_Q(zeta)) by direct composition.
template <class Zeta>
double v_composed(Zeta&& zeta, const ObservedRecord& r, const RecordNuisance& n, double floor) {
  auto xi = [&](double q, double t) { return v_q_general(zeta, q, t, n.f, n.g, floor); };
  return v_c_general(xi, r, n.f, n.sd, floor);
}

}  // namespace ltrc

#endif  // LTRC_OPERATORS_HPP
