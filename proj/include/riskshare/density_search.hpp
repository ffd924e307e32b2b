#ifndef RISKSHARE_DENSITY_SEARCH_HPP
#define RISKSHARE_DENSITY_SEARCH_HPP

// Maximization of concave scores over sets of densities
//
//   maximize   E^Q[x] - C * KL(Q || P)
//   over       q >= 0, E^P[q] = 1, q <= u, and q in every inflated hull
//
// where an inflated hull with factor f and generators g_1..g_k is the set
// { q : q <= f * sum_j lambda_j g_j for some lambda in the unit simplex }.
// With f = 1 and density generators this is the convex hull of the generators.
//
// Routing:
//   C == 0                  -> one LP (lp_solve)
//   C > 0, box constraints  -> mirror-projected gradient ascent with backtracking
//   C > 0, hull constraints -> away-step Frank-Wolfe with an LP oracle

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "riskshare/errors.hpp"
#include "riskshare/lp.hpp"
#include "riskshare/prob_core.hpp"

namespace riskshare {

struct InflatedHull {
  double factor = 1.0;
  std::vector<std::vector<double>> generators;

  friend bool operator==(const InflatedHull&, const InflatedHull&) = default;
};

struct DensityConstraints {
  /// Per-state upper bound on q; empty means no box.
  std::vector<double> upper;
  std::vector<InflatedHull> hulls;

  bool polyhedral_only() const noexcept { return hulls.empty(); }
};

struct DensityObjective {
  std::vector<double> linear;
  double entropic_weight = 0.0;
};

struct DensitySearchResult {
  std::vector<double> q;
  double score = 0.0;
  std::size_t iterations = 0;
  /// Gradient-mapping norm (mirror ascent), Frank-Wolfe gap, or 0 for LP.
  double residual = 0.0;
};

struct DensitySearchOptions {
  std::size_t max_iterations = 50000;
  double mapping_tol = 1e-8;
  double fw_gap_tol = 1e-10;
};

inline double entropic_score(const ProbSpace& space, const DensityObjective& obj,
                             const std::vector<double>& q) {
  double lin = 0.0;
  double ent = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    lin += space[i] * q[i] * obj.linear[i];
    if (q[i] > 0.0) ent += space[i] * q[i] * std::log(q[i]);
  }
  return lin - obj.entropic_weight * ent;
}

/// LP over (q, lambda_1, ..., lambda_h) encoding the density constraints, with
/// objective sum_i p_i c_i q_i.
inline LpProblem density_lp(const ProbSpace& space, const std::vector<double>& coeff,
                            const DensityConstraints& cons) {
  const std::size_t n = space.size();
  std::size_t nvars = n;
  for (const auto& h : cons.hulls) nvars += h.generators.size();

  LpProblem lp;
  lp.objective.assign(nvars, 0.0);
  for (std::size_t i = 0; i < n; ++i) lp.objective[i] = space[i] * coeff[i];

  std::vector<double> mass(nvars, 0.0);
  for (std::size_t i = 0; i < n; ++i) mass[i] = space[i];
  lp.add_eq(std::move(mass), 1.0);

  std::size_t offset = n;
  for (const auto& h : cons.hulls) {
    const std::size_t k = h.generators.size();
    std::vector<double> simplex(nvars, 0.0);
    for (std::size_t j = 0; j < k; ++j) simplex[offset + j] = 1.0;
    lp.add_eq(std::move(simplex), 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(nvars, 0.0);
      row[i] = 1.0;
      for (std::size_t j = 0; j < k; ++j) row[offset + j] = -h.factor * h.generators[j][i];
      lp.add_le(std::move(row), 0.0);
    }
    offset += k;
  }
  if (!cons.upper.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(cons.upper[i])) continue;
      std::vector<double> row(nvars, 0.0);
      row[i] = 1.0;
      lp.add_le(std::move(row), cons.upper[i]);
    }
  }
  return lp;
}

/// Smallest E^P[(q - f * sum_j lambda_j g_j)^+] over the simplex of lambdas.
/// For f = 1 and density generators this is the total-variation distance from
/// q to the convex hull of the generators.
inline double inflated_hull_violation(const ProbSpace& space, std::span<const double> q,
                                      const InflatedHull& hull) {
  const std::size_t n = space.size();
  const std::size_t k = hull.generators.size();
  // variables: lambda (k), s (n)
  LpProblem lp;
  lp.objective.assign(k + n, 0.0);
  for (std::size_t i = 0; i < n; ++i) lp.objective[k + i] = -space[i];
  std::vector<double> simplex(k + n, 0.0);
  for (std::size_t j = 0; j < k; ++j) simplex[j] = 1.0;
  lp.add_eq(std::move(simplex), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(k + n, 0.0);
    for (std::size_t j = 0; j < k; ++j) row[j] = -hull.factor * hull.generators[j][i];
    row[k + i] = -1.0;
    lp.add_le(std::move(row), -q[i]);
  }
  const LpSolution sol = lp_solve(lp);
  if (sol.status != LpStatus::optimal)
    throw ConvergenceError(std::string("hull membership LP: ") + to_string(sol.status), {}, 0.0,
                           std::numeric_limits<double>::infinity());
  return std::max(-sol.value, 0.0);
}

namespace detail {

inline std::vector<double> lp_density_point(const LpSolution& sol, std::size_t n) {
  return std::vector<double>(sol.point.begin(), sol.point.begin() + static_cast<std::ptrdiff_t>(n));
}

inline LpSolution solve_density_lp(const ProbSpace& space, const std::vector<double>& coeff,
                                   const DensityConstraints& cons) {
  const LpSolution sol = lp_solve(density_lp(space, coeff, cons));
  if (sol.status == LpStatus::infeasible)
    throw IllPosedError("no density satisfies the combined scenario constraints");
  if (sol.status != LpStatus::optimal)
    throw ConvergenceError(std::string("density LP: ") + to_string(sol.status), {}, 0.0,
                           std::numeric_limits<double>::infinity());
  return sol;
}

// Bregman (KL) projection of exp(log_y) onto {0 <= z <= u, E^P[z] = 1}:
// z_i = min(u_i, s * y_i) with the scalar s fixed by the mass constraint.
inline std::vector<double> kl_project_box(const ProbSpace& space, const std::vector<double>& log_y,
                                          const std::vector<double>& upper) {
  const std::size_t n = log_y.size();
  const double shift = *std::max_element(log_y.begin(), log_y.end());
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(log_y[i] - shift);

  auto cap = [&](std::size_t i) {
    return upper.empty() ? std::numeric_limits<double>::infinity() : upper[i];
  };
  // Breakpoints s_i = u_i / y_i at which coordinate i saturates.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> brk(n);
  for (std::size_t i = 0; i < n; ++i)
    brk[i] = y[i] > 0.0 ? cap(i) / y[i] : std::numeric_limits<double>::infinity();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return brk[a] < brk[b]; });

  std::vector<bool> capped(n, false);
  double s = 0.0;
  bool found = false;
  for (std::size_t k = 0; k <= n; ++k) {
    double capped_mass = 0.0;
    double free_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (capped[i]) capped_mass += space[i] * cap(i);
      else free_weight += space[i] * y[i];
    }
    if (free_weight > 0.0) {
      const double cand = (1.0 - capped_mass) / free_weight;
      const double next = k < n ? brk[order[k]] : std::numeric_limits<double>::infinity();
      if (cand <= next) {
        s = cand;
        found = true;
        break;
      }
    }
    if (k == n) break;
    capped[order[k]] = true;
  }
  if (!found) throw IllPosedError("density upper bounds admit no probability density");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = capped[i] ? cap(i) : std::min(cap(i), s * y[i]);
  return z;
}

inline DensitySearchResult mirror_ascent(const ProbSpace& space, const DensityObjective& obj,
                                         const std::vector<double>& upper,
                                         const DensitySearchOptions& opt) {
  const std::size_t n = space.size();
  const double c = obj.entropic_weight;
  std::vector<double> q = kl_project_box(space, std::vector<double>(n, 0.0), upper);
  double fq = entropic_score(space, obj, q);
  double step = 1.0 / c;
  double mapping = std::numeric_limits<double>::infinity();

  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      grad[i] = q[i] > 0.0 ? obj.linear[i] - c * (std::log(q[i]) + 1.0) : 0.0;

    std::vector<double> z;
    double fz = 0.0;
    double t = step;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      std::vector<double> log_y(n);
      for (std::size_t i = 0; i < n; ++i)
        log_y[i] = q[i] > 0.0 ? std::log(q[i]) + t * grad[i] : -std::numeric_limits<double>::infinity();
      z = kl_project_box(space, log_y, upper);
      fz = entropic_score(space, obj, z);
      double lin = 0.0;
      double breg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        lin += space[i] * grad[i] * (z[i] - q[i]);
        if (z[i] > 0.0 && q[i] > 0.0) breg += space[i] * (z[i] * std::log(z[i] / q[i]) - z[i] + q[i]);
        else breg += space[i] * (q[i] - z[i]);
      }
      if (fz >= fq + lin - breg / t - 1e-15 * (1.0 + std::abs(fq))) break;
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm2 += space[i] * (z[i] - q[i]) * (z[i] - q[i]);
    mapping = std::sqrt(norm2) / t;
    step = t;
    if (fz >= fq) {
      q = std::move(z);
      fq = fz;
    }
    if (mapping <= opt.mapping_tol) break;
  }
  if (mapping > opt.mapping_tol)
    throw ConvergenceError("mirror ascent did not converge", q, fq, mapping);
  return {q, fq, it + 1, mapping};
}

inline bool same_point(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-12) return false;
  return true;
}

inline DensitySearchResult away_step_frank_wolfe(const ProbSpace& space, const DensityObjective& obj,
                                                 const DensityConstraints& cons,
                                                 const DensitySearchOptions& opt) {
  const std::size_t n = space.size();
  const double c = obj.entropic_weight;
  struct Atom {
    std::vector<double> v;
    double w;
  };
  std::vector<Atom> active;

  // Start from the average of coordinate-maximizing vertices so the iterate
  // has the largest support the feasible set allows.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0 / space[i];
    auto v = lp_density_point(solve_density_lp(space, e, cons), n);
    bool dup = false;
    for (auto& a : active)
      if (same_point(a.v, v)) {
        a.w += 1.0;
        dup = true;
        break;
      }
    if (!dup) active.push_back({std::move(v), 1.0});
  }
  for (auto& a : active) a.w /= static_cast<double>(n);

  auto rebuild = [&]() {
    std::vector<double> q(n, 0.0);
    for (const auto& a : active)
      for (std::size_t i = 0; i < n; ++i) q[i] += a.w * a.v[i];
    for (double& v : q) v = std::max(v, 0.0);
    return q;
  };
  auto pair = [&](const std::vector<double>& g, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += space[i] * g[i] * v[i];
    return s;
  };

  std::vector<double> q = rebuild();
  double gap = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
      g[i] = q[i] > 0.0 ? obj.linear[i] - c * (std::log(q[i]) + 1.0) : obj.linear[i];

    std::vector<double> s = lp_density_point(solve_density_lp(space, g, cons), n);
    const double gq = pair(g, q);
    gap = pair(g, s) - gq;
    const double fq = entropic_score(space, obj, q);
    if (gap <= opt.fw_gap_tol * (1.0 + std::abs(fq))) break;

    std::size_t away = 0;
    for (std::size_t a = 1; a < active.size(); ++a)
      if (pair(g, active[a].v) < pair(g, active[away].v)) away = a;
    const double away_gap = gq - pair(g, active[away].v);

    std::vector<double> d(n);
    double tmax = 1.0;
    const bool fw_step = gap >= away_gap || active.size() == 1;
    if (fw_step) {
      for (std::size_t i = 0; i < n; ++i) d[i] = s[i] - q[i];
    } else {
      const double aw = active[away].w;
      for (std::size_t i = 0; i < n; ++i) d[i] = q[i] - active[away].v[i];
      tmax = aw / (1.0 - aw);
    }

    auto slope = [&](double t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d[i] == 0.0) continue;
        const double qi = q[i] + t * d[i];
        // The entropy term's derivative is +inf at zero, so the slope toward
        // a vanishing coordinate is -inf and the search stops short of it.
        const double gi = qi > 0.0 ? obj.linear[i] - c * (std::log(qi) + 1.0)
                                   : std::numeric_limits<double>::infinity();
        acc += space[i] * d[i] * gi;
      }
      return acc;
    };
    double t = tmax;
    if (slope(tmax) < 0.0) {
      double lo = 0.0, hi = tmax;
      for (int k = 0; k < 100; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (slope(mid) > 0.0) lo = mid;
        else hi = mid;
      }
      t = 0.5 * (lo + hi);
    }

    if (fw_step) {
      for (auto& a : active) a.w *= (1.0 - t);
      bool merged = false;
      for (auto& a : active)
        if (same_point(a.v, s)) {
          a.w += t;
          merged = true;
          break;
        }
      if (!merged) active.push_back({s, t});
    } else {
      for (auto& a : active) a.w *= (1.0 + t);
      active[away].w -= t;
    }
    std::erase_if(active, [](const Atom& a) { return a.w <= 1e-15; });
    double total = 0.0;
    for (const auto& a : active) total += a.w;
    for (auto& a : active) a.w /= total;
    q = rebuild();
  }
  const double fq = entropic_score(space, obj, q);
  if (gap > opt.fw_gap_tol * (1.0 + std::abs(fq)))
    throw ConvergenceError("Frank-Wolfe did not reach its duality-gap tolerance", q, fq, gap);
  return {q, fq, it + 1, std::max(gap, 0.0)};
}

}  // namespace detail

/// Maximizes E^Q[x] - C KL(Q||P) over densities meeting `cons`.
///
/// Throws IllPosedError if no density satisfies the constraints, and
/// ConvergenceError (with the best iterate) if an iterative path stops early.
inline DensitySearchResult maximize_over_densities(const ProbSpace& space, const DensityObjective& obj,
                                                   const DensityConstraints& cons,
                                                   const DensitySearchOptions& opt = {}) {
  const std::size_t n = space.size();
  require_same_size("maximize_over_densities objective", n, obj.linear.size());
  if (!cons.upper.empty()) require_same_size("maximize_over_densities upper bound", n, cons.upper.size());
  for (const auto& h : cons.hulls) {
    if (h.generators.empty()) throw ValidationError("inflated hull without generators");
    for (const auto& g : h.generators) require_same_size("inflated hull generator", n, g.size());
  }
  if (!(obj.entropic_weight >= 0.0) || !std::isfinite(obj.entropic_weight))
    throw ValidationError("entropic weight must be finite and >= 0");

  if (obj.entropic_weight == 0.0) {
    const LpSolution sol = detail::solve_density_lp(space, obj.linear, cons);
    auto q = detail::lp_density_point(sol, n);
    return {q, entropic_score(space, obj, q), sol.iterations, 0.0};
  }
  if (cons.hulls.empty()) return detail::mirror_ascent(space, obj, cons.upper, opt);
  return detail::away_step_frank_wolfe(space, obj, cons, opt);
}

}  // namespace riskshare

#endif  // RISKSHARE_DENSITY_SEARCH_HPP
