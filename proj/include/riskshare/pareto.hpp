#ifndef RISKSHARE_PARETO_HPP
#define RISKSHARE_PARETO_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "riskshare/agent_space.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/infimal_convolution.hpp"

namespace riskshare {

inline constexpr double kParetoTol = 1e-7;

struct ParetoVerdict {
  bool efficient = false;
  /// An allocation improving every atom, when one is available.
  std::optional<Allocation> witness;
  double excess = 0.0;
  double total_risk = 0.0;
  double value = 0.0;
};

/// Turns a strict total-risk improvement `better` into an allocation that
/// lowers every atom's risk by the same amount R > 0, using cash transfers.
inline Allocation pareto_improve(const Market& m, const Rv& x, const Allocation& alloc, const Allocation& better) {
  const auto& agents = m.agents();
  if (!is_feasible(agents, better, x))
    throw ValidationError("pareto_improve: the improving allocation is not feasible");
  std::vector<double> diff(agents.size());
  double total = 0.0;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    diff[a] = rho(m.family()[a], m.space(), alloc.row(a)) - rho(m.family()[a], m.space(), better.row(a));
    total += agents[a].weight * diff[a];
  }
  const double r = total / agents.total_mass();
  if (!(r > 0.0))
    throw ValidationError("pareto_improve: the second allocation does not strictly lower total risk");
  Allocation z(agents.size(), x.size());
  for (std::size_t a = 0; a < agents.size(); ++a) z.set_row(a, better.row(a) + (diff[a] - r));
  return z;
}

/// Efficient iff total risk exceeds the value function by at most tol. For
/// profile markets an inefficient verdict carries a uniform improvement built
/// from the closed-form optimal allocation.
inline ParetoVerdict pareto_check(const Market& m, const Rv& x, const Allocation& alloc, double tol = kParetoTol) {
  if (!(tol >= 0.0)) throw ValidationError("pareto_check: tol must be >= 0");
  if (!is_feasible(m.agents(), alloc, x)) throw ValidationError("pareto_check: allocation is not feasible for x");
  const ShareResult v = value(m, x);
  if (!std::isfinite(v.value)) throw IllPosedError("pareto_check: value function is not finite");
  ParetoVerdict out;
  out.total_risk = total_risk(m.agents(), m.family(), m.space(), alloc);
  out.value = v.value;
  out.excess = std::max(out.total_risk - v.value, 0.0);
  out.efficient = out.excess <= tol;
  if (!out.efficient && v.allocation) out.witness = pareto_improve(m, x, alloc, *v.allocation);
  return out;
}

}  // namespace riskshare

#endif  // RISKSHARE_PARETO_HPP
