#ifndef RISKSHARE_ORACLE_HPP
#define RISKSHARE_ORACLE_HPP

// Slow reference implementations for tests. None of these call the sorting
// rule, the density search, or the closed forms they are used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "riskshare/agent_space.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/infimal_convolution.hpp"
#include "riskshare/lp.hpp"
#include "riskshare/prob_core.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare::oracle {

/// ES^alpha(x) = max { E^P[q x] : 0 <= q <= 1/alpha, E^P[q] = 1 } posed as an LP.
inline double es_lp_oracle(const ProbSpace& space, double alpha, const Rv& x) {
  const std::size_t n = space.size();
  if (n > 12) throw ValidationError("es_lp_oracle: at most 12 states");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("es_lp_oracle: alpha must lie in (0, 1]");
  require_same_size("es_lp_oracle", n, x.size());
  LpProblem lp;
  lp.objective.resize(n);
  for (std::size_t i = 0; i < n; ++i) lp.objective[i] = space[i] * x[i];
  lp.add_eq(std::vector<double>(space.probs().begin(), space.probs().end()), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n, 0.0);
    row[i] = 1.0;
    lp.add_le(std::move(row), 1.0 / alpha);
  }
  const LpSolution s = lp_solve(lp);
  if (s.status != LpStatus::optimal) throw ConvergenceError("es_lp_oracle: LP not optimal", {}, 0.0, 0.0);
  return s.value;
}

namespace detail {

// Solves the square system a z = b by Gaussian elimination with partial
// pivoting. Returns false when the matrix is numerically singular.
inline bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& z) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-10) return false;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  z.resize(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = b[i] / a[i][i];
  return true;
}

}  // namespace detail

/// Exhaustive vertex enumeration: every choice of active inequality
/// constraints (including x >= 0) that, with the equalities, pins down a
/// unique point. Assumes the feasible region is bounded.
inline LpSolution vertex_enum_lp(const LpProblem& p) {
  p.validate();
  const std::size_t n = p.num_vars();
  const std::size_t m_eq = p.eq_matrix.size();
  const std::size_t m_le = p.le_matrix.size();
  if (n > 6 || m_eq + m_le > 8) throw ValidationError("vertex_enum_lp: at most 6 variables and 8 constraints");

  // Candidate active rows: the le rows, then x_j >= 0 written as -x_j <= 0.
  std::vector<std::vector<double>> rows = p.le_matrix;
  std::vector<double> rhs = p.le_rhs;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> r(n, 0.0);
    r[j] = -1.0;
    rows.push_back(std::move(r));
    rhs.push_back(0.0);
  }
  LpSolution best;
  best.status = LpStatus::infeasible;
  if (m_eq > n) return best;
  const std::size_t pick = n - m_eq;
  const std::size_t total = rows.size();
  std::vector<bool> mask(total, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(pick), true);

  auto feasible = [&](const std::vector<double>& z) {
    return lp_residual(p, z) <= 1e-9;
  };
  do {
    std::vector<std::vector<double>> a = p.eq_matrix;
    std::vector<double> b = p.eq_rhs;
    for (std::size_t k = 0; k < total; ++k)
      if (mask[k]) {
        a.push_back(rows[k]);
        b.push_back(rhs[k]);
      }
    std::vector<double> z;
    if (!detail::solve_square(std::move(a), std::move(b), z) || !feasible(z)) continue;
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) v += p.objective[j] * z[j];
    if (best.status != LpStatus::optimal || v > best.value) {
      best.status = LpStatus::optimal;
      best.value = v;
      best.point = z;
    }
    ++best.iterations;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

/// Independent evaluator for risk specs: no log-sum-exp shift, ES through its
/// LP, inflations through an LP over (q, mu) with sum(mu) = gamma.
inline double oracle_rho(const RiskSpec& spec, const ProbSpace& space, const Rv& x) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Entropic>) {
          double s = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) s += space[i] * std::exp(x[i] / n.gamma);
          return n.gamma * std::log(s);
        } else if constexpr (std::is_same_v<T, ExpectedShortfall>) {
          return es_lp_oracle(space, n.alpha, x);
        } else if constexpr (std::is_same_v<T, ScenarioSet>) {
          double best = -std::numeric_limits<double>::infinity();
          for (const auto& d : n.densities) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) s += space[i] * d[i] * x[i];
            best = std::max(best, s);
          }
          return best;
        } else if constexpr (std::is_same_v<T, Dilation>) {
          return n.gamma * oracle_rho(n.base, space, x / n.gamma);
        } else {
          // Flatten nested inflations into a factor on the innermost base.
          double factor = n.gamma;
          const RiskSpec* base = &n.base;
          for (;;) {
            if (const auto* inner = std::get_if<Inflation>(&base->node().v)) {
              factor *= inner->gamma;
              base = &inner->base;
            } else if (const auto* dil = std::get_if<Dilation>(&base->node().v)) {
              base = &dil->base;  // coherent bases are dilation invariant
            } else {
              break;
            }
          }
          std::vector<std::vector<double>> gens;
          if (const auto* es = std::get_if<ExpectedShortfall>(&base->node().v)) {
            factor /= es->alpha;
            gens.push_back(std::vector<double>(x.size(), 1.0));
          } else if (const auto* ss = std::get_if<ScenarioSet>(&base->node().v)) {
            for (const auto& d : ss->densities) gens.push_back(d.vec());
          } else {
            throw ValidationError("oracle_rho: inflation of a non-coherent base");
          }
          const std::size_t nq = x.size();
          const std::size_t k = gens.size();
          LpProblem lp;
          lp.objective.assign(nq + k, 0.0);
          for (std::size_t i = 0; i < nq; ++i) lp.objective[i] = space[i] * x[i];
          std::vector<double> mass(nq + k, 0.0);
          for (std::size_t i = 0; i < nq; ++i) mass[i] = space[i];
          lp.add_eq(mass, 1.0);
          std::vector<double> mu(nq + k, 0.0);
          for (std::size_t j = 0; j < k; ++j) mu[nq + j] = 1.0;
          lp.add_eq(mu, factor);
          for (std::size_t i = 0; i < nq; ++i) {
            std::vector<double> row(nq + k, 0.0);
            row[i] = 1.0;
            for (std::size_t j = 0; j < k; ++j) row[nq + j] = -gens[j][i];
            lp.add_le(std::move(row), 0.0);
          }
          const LpSolution s = lp_solve(lp);
          if (s.status != LpStatus::optimal) throw ConvergenceError("oracle_rho: LP not optimal", {}, 0.0, 0.0);
          return s.value;
        }
      },
      spec.node().v);
}

struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t points_per_axis = 2;

  void validate(std::size_t dims) const {
    require_same_size("GridSpec lower", dims, lower.size());
    require_same_size("GridSpec upper", dims, upper.size());
    if (points_per_axis < 2) throw ValidationError("GridSpec: points_per_axis must be >= 2");
    for (std::size_t d = 0; d < dims; ++d)
      if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d]))
        throw ValidationError("GridSpec: bounds must be finite with lower < upper");
  }

  /// The box [-2 |x|_inf, 2 |x|_inf] in every free coordinate (at least [-2, 2]).
  static GridSpec around(const Rv& x, std::size_t dims, std::size_t points) {
    const double r = 2.0 * std::max(sup_norm(x), 1.0);
    return {std::vector<double>(dims, -r), std::vector<double>(dims, r), points};
  }
};

inline std::size_t brute_force_dims(const Market& m) { return (m.agents().size() - 1) * m.space().size(); }

/// Direct minimization of total risk over feasible allocations. The first
/// atoms' shares are free; the last atom absorbs the rest of x. Grid search,
/// then pattern search from the best few grid points with step halving down
/// to 1e-6.
inline double brute_force_value(const Market& m, const Rv& x, const GridSpec& grid) {
  const auto& agents = m.agents();
  const std::size_t n = m.space().size();
  const std::size_t na = agents.size();
  const std::size_t dims = brute_force_dims(m);
  if (dims > 6) throw ValidationError("brute_force_value: at most 6 free coordinates");
  require_same_size("brute_force_value", n, x.size());

  auto objective = [&](const std::vector<double>& z) {
    double total = 0.0;
    std::vector<double> last(x.vec());
    for (std::size_t a = 0; a + 1 < na; ++a) {
      const Rv row(std::vector<double>(z.begin() + static_cast<std::ptrdiff_t>(a * n),
                                       z.begin() + static_cast<std::ptrdiff_t>((a + 1) * n)));
      total += agents[a].weight * oracle_rho(m.family()[a], m.space(), row);
      for (std::size_t i = 0; i < n; ++i) last[i] -= agents[a].weight * row[i];
    }
    const double wl = agents[na - 1].weight;
    for (double& v : last) v /= wl;
    return total + wl * oracle_rho(m.family()[na - 1], m.space(), Rv(std::move(last)));
  };
  if (dims == 0) return objective({});
  grid.validate(dims);

  // Exhaustive grid.
  const std::size_t k = grid.points_per_axis;
  std::vector<std::size_t> idx(dims, 0);
  std::vector<std::pair<double, std::vector<double>>> best;  // few best points
  const std::size_t keep = 4;
  for (;;) {
    std::vector<double> z(dims);
    for (std::size_t d = 0; d < dims; ++d)
      z[d] = grid.lower[d] + (grid.upper[d] - grid.lower[d]) * static_cast<double>(idx[d]) / static_cast<double>(k - 1);
    const double f = objective(z);
    best.emplace_back(f, std::move(z));
    std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (best.size() > keep) best.pop_back();
    std::size_t d = 0;
    while (d < dims && ++idx[d] == k) idx[d++] = 0;
    if (d == dims) break;
  }

  // Polish directions: coordinate axes and pairwise diagonals.
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < dims; ++i) {
    std::vector<double> e(dims, 0.0);
    e[i] = 1.0;
    dirs.push_back(e);
    for (std::size_t j = i + 1; j < dims; ++j) {
      auto a = e, b = e;
      a[j] = 1.0;
      b[j] = -1.0;
      dirs.push_back(a);
      dirs.push_back(b);
    }
  }
  double h0 = 0.0;
  for (std::size_t d = 0; d < dims; ++d)
    h0 = std::max(h0, (grid.upper[d] - grid.lower[d]) / static_cast<double>(k - 1));

  double result = std::numeric_limits<double>::infinity();
  for (auto& [fz, z] : best) {
    for (double h = h0; h >= 1e-6;) {
      bool moved = false;
      for (const auto& dir : dirs) {
        for (double sgn : {1.0, -1.0}) {
          std::vector<double> cand(z);
          for (std::size_t d = 0; d < dims; ++d) cand[d] += sgn * h * dir[d];
          const double fc = objective(cand);
          if (fc < fz - 1e-15) {
            z = std::move(cand);
            fz = fc;
            moved = true;
          }
        }
      }
      if (!moved) h *= 0.5;
    }
    result = std::min(result, fz);
  }
  return result;
}

}  // namespace riskshare::oracle

#endif  // RISKSHARE_ORACLE_HPP
