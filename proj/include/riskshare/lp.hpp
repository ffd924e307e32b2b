#ifndef RISKSHARE_LP_HPP
#define RISKSHARE_LP_HPP

// Small dense linear programs:
//
//   maximize    c . x
//   subject to  A_eq x  = b_eq
//               A_le x <= b_le
//               x >= 0
//
// solved by a two-phase tableau simplex with Bland's pivoting rule. Problems
// here have a few dozen variables at most, so there is no scaling, presolve,
// or sparse storage.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "riskshare/errors.hpp"

namespace riskshare {

struct LpProblem {
  std::vector<double> objective;
  std::vector<std::vector<double>> eq_matrix;
  std::vector<double> eq_rhs;
  std::vector<std::vector<double>> le_matrix;
  std::vector<double> le_rhs;

  std::size_t num_vars() const noexcept { return objective.size(); }

  void add_eq(std::vector<double> row, double rhs) {
    eq_matrix.push_back(std::move(row));
    eq_rhs.push_back(rhs);
  }
  void add_le(std::vector<double> row, double rhs) {
    le_matrix.push_back(std::move(row));
    le_rhs.push_back(rhs);
  }

  void validate() const {
    const std::size_t n = num_vars();
    if (n == 0) throw ValidationError("LpProblem: no variables");
    if (eq_matrix.size() != eq_rhs.size())
      throw DimensionMismatch("LpProblem equality rhs", eq_matrix.size(), eq_rhs.size());
    if (le_matrix.size() != le_rhs.size())
      throw DimensionMismatch("LpProblem inequality rhs", le_matrix.size(), le_rhs.size());
    auto check_row = [n](const std::vector<double>& row, const char* what) {
      if (row.size() != n) throw DimensionMismatch(what, n, row.size());
      for (double v : row)
        if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite coefficient");
    };
    check_row(objective, "LpProblem objective");
    for (const auto& r : eq_matrix) check_row(r, "LpProblem equality row");
    for (const auto& r : le_matrix) check_row(r, "LpProblem inequality row");
    for (double b : eq_rhs)
      if (!std::isfinite(b)) throw ValidationError("LpProblem: non-finite equality rhs");
    for (double b : le_rhs)
      if (!std::isfinite(b)) throw ValidationError("LpProblem: non-finite inequality rhs");
  }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> point;
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Largest violation of the constraints of `p` at `x` (equalities, inequalities
/// and nonnegativity).
inline double lp_residual(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, -v);
  for (std::size_t r = 0; r < p.eq_matrix.size(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += p.eq_matrix[r][j] * x[j];
    worst = std::max(worst, std::abs(s - p.eq_rhs[r]));
  }
  for (std::size_t r = 0; r < p.le_matrix.size(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += p.le_matrix[r][j] * x[j];
    worst = std::max(worst, s - p.le_rhs[r]);
  }
  return worst;
}

namespace detail {

class Tableau {
public:
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kCostTol = 1e-11;

  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows, std::vector<double>(cols + 1, 0.0)),
        obj_(cols + 1, 0.0), basis_(rows, 0), allowed_(cols, true) {}

  double& at(std::size_t r, std::size_t c) { return a_[r][c]; }
  double& rhs(std::size_t r) { return a_[r][cols_]; }
  std::size_t& basis(std::size_t r) { return basis_[r]; }
  std::size_t rows() const { return rows_; }
  void forbid(std::size_t c) { allowed_[c] = false; }

  // Installs the objective `c` (maximize) in reduced-cost form for the current basis.
  void set_objective(const std::vector<double>& c) {
    for (std::size_t j = 0; j < cols_; ++j) obj_[j] = -c[j];
    obj_[cols_] = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = c[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) obj_[j] += cb * a_[r][j];
    }
  }

  double objective_value() const { return obj_[cols_]; }

  void pivot(std::size_t r, std::size_t c) {
    const double piv = a_[r][c];
    for (double& v : a_[r]) v /= piv;
    a_[r][c] = 1.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = a_[i][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) a_[i][j] -= f * a_[r][j];
      a_[i][c] = 0.0;
    }
    const double f = obj_[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= cols_; ++j) obj_[j] -= f * a_[r][j];
      obj_[c] = 0.0;
    }
    basis_[r] = c;
  }

  // Runs Bland's rule to optimality. Returns optimal/unbounded/iteration_limit.
  LpStatus optimize(std::size_t& iterations, std::size_t cap) {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (allowed_[j] && obj_[j] < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return LpStatus::optimal;
      if (iterations >= cap) return LpStatus::iteration_limit;

      std::size_t leave = rows_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double v = a_[r][enter];
        if (v <= kPivotTol) continue;
        const double ratio = std::max(a_[r][cols_], 0.0) / v;
        if (leave == rows_) {
          best = ratio;
          leave = r;
          continue;
        }
        const double slack = 1e-12 * (1.0 + std::abs(best));
        if (ratio < best - slack) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + slack && basis_[r] < basis_[leave]) {
          // Bland: ties go to the smallest basic index.
          best = std::min(best, ratio);
          leave = r;
        }
      }
      if (leave == rows_) return LpStatus::unbounded;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void drop_row(std::size_t r) {
    a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --rows_;
  }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::vector<double>> a_;
  std::vector<double> obj_;
  std::vector<std::size_t> basis_;
  std::vector<bool> allowed_;
};

}  // namespace detail

/// Solves `p` exactly as posed (no scaling). Deterministic: identical inputs
/// give bit-identical outputs. The iteration cap is 10,000 times the number of
/// standard-form columns; hitting it yields LpStatus::iteration_limit.
inline LpSolution lp_solve(const LpProblem& p) {
  p.validate();
  const std::size_t n = p.num_vars();
  const std::size_t m_eq = p.eq_matrix.size();
  const std::size_t m_le = p.le_matrix.size();
  const std::size_t m = m_eq + m_le;

  // Columns: [0, n) originals, [n, n + m_le) slacks, then one artificial per row
  // that has no natural starting basic variable.
  std::vector<bool> needs_artificial(m, false);
  std::size_t n_art = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const bool is_le = r >= m_eq;
    const double b = is_le ? p.le_rhs[r - m_eq] : p.eq_rhs[r];
    needs_artificial[r] = !is_le || b < 0.0;
    if (needs_artificial[r]) ++n_art;
  }
  const std::size_t cols = n + m_le + n_art;
  detail::Tableau t(m, cols);

  std::size_t art = n + m_le;
  for (std::size_t r = 0; r < m; ++r) {
    const bool is_le = r >= m_eq;
    const auto& row = is_le ? p.le_matrix[r - m_eq] : p.eq_matrix[r];
    double b = is_le ? p.le_rhs[r - m_eq] : p.eq_rhs[r];
    const double sign = b < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(r, j) = sign * row[j];
    if (is_le) t.at(r, n + (r - m_eq)) = sign;
    t.rhs(r) = sign * b;
    if (needs_artificial[r]) {
      t.at(r, art) = 1.0;
      t.basis(r) = art++;
    } else {
      t.basis(r) = n + (r - m_eq);
    }
  }

  LpSolution sol;
  const std::size_t cap = 10000 * (cols + 1);

  if (n_art > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = n + m_le; j < cols; ++j) phase1[j] = -1.0;
    t.set_objective(phase1);
    const LpStatus s1 = t.optimize(sol.iterations, cap);
    if (s1 == LpStatus::iteration_limit) {
      sol.status = s1;
      return sol;
    }
    double scale = 1.0;
    for (double b : p.eq_rhs) scale = std::max(scale, std::abs(b));
    for (double b : p.le_rhs) scale = std::max(scale, std::abs(b));
    if (t.objective_value() < -1e-9 * scale) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    // Pivot zero-level artificials out of the basis; rows where that is
    // impossible are redundant.
    for (std::size_t r = 0; r < t.rows();) {
      if (t.basis(r) < n + m_le) {
        ++r;
        continue;
      }
      std::size_t c = cols;
      for (std::size_t j = 0; j < n + m_le; ++j) {
        if (std::abs(t.at(r, j)) > detail::Tableau::kPivotTol) {
          c = j;
          break;
        }
      }
      if (c == cols) {
        t.drop_row(r);
      } else {
        t.pivot(r, c);
        ++r;
      }
    }
    for (std::size_t j = n + m_le; j < cols; ++j) t.forbid(j);
  }

  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = p.objective[j];
  t.set_objective(phase2);
  const LpStatus s2 = t.optimize(sol.iterations, cap);
  if (s2 != LpStatus::optimal) {
    sol.status = s2;
    return sol;
  }

  sol.status = LpStatus::optimal;
  sol.point.assign(n, 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::size_t b = t.basis(r);
    if (b < n) sol.point[b] = std::max(t.rhs(r), 0.0);
  }
  sol.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.value += p.objective[j] * sol.point[j];
  return sol;
}

}  // namespace riskshare

#endif  // RISKSHARE_LP_HPP
