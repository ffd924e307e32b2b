#ifndef RISKSHARE_AGENT_SPACE_HPP
#define RISKSHARE_AGENT_SPACE_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "riskshare/errors.hpp"
#include "riskshare/prob_core.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare {

struct Atom {
  std::string label;
  double weight;
  /// Location in [0, 1] for quadrature atoms; NaN for abstract agents.
  double position = std::numeric_limits<double>::quiet_NaN();
};

/// Finitely many weighted agents standing in for (A, mu).
class AgentSpace {
public:
  explicit AgentSpace(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw ValidationError("AgentSpace: at least one atom is required");
    std::set<std::string> seen;
    for (const auto& a : atoms_) {
      if (!std::isfinite(a.weight) || a.weight <= 0.0)
        throw ValidationError("AgentSpace: weight of atom '" + a.label + "' must be finite and > 0");
      if (!seen.insert(a.label).second) throw ValidationError("AgentSpace: duplicate atom label '" + a.label + "'");
      total_ += a.weight;
    }
    if (!std::isfinite(total_)) throw ValidationError("AgentSpace: total mass is not finite");
  }

  /// n agents of unit mass labelled a1..an.
  static AgentSpace finite(std::size_t n) {
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < n; ++k) atoms.push_back({"a" + std::to_string(k + 1), 1.0});
    return AgentSpace(std::move(atoms));
  }

  /// Midpoint rule for Lebesgue measure on [0, 1]: atoms at (k + 1/2)/n, mass 1/n.
  static AgentSpace lebesgue(std::size_t n) { return AgentSpace(midpoints(n)); }

  /// Lebesgue quadrature plus unit point masses at 0 and 1.
  static AgentSpace shapley(std::size_t n) {
    auto atoms = midpoints(n);
    atoms.push_back({"delta0", 1.0, 0.0});
    atoms.push_back({"delta1", 1.0, 1.0});
    return AgentSpace(std::move(atoms));
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  const Atom& operator[](std::size_t a) const { return atoms_[a]; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double total_mass() const noexcept { return total_; }

private:
  static std::vector<Atom> midpoints(std::size_t n) {
    if (n == 0) throw ValidationError("AgentSpace: quadrature needs at least one atom");
    std::vector<Atom> atoms;
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
      atoms.push_back({"t" + std::to_string(k + 1), w, (static_cast<double>(k) + 0.5) * w});
    return atoms;
  }

  std::vector<Atom> atoms_;
  double total_ = 0.0;
};

/// Agent-by-state share matrix.
class Allocation {
public:
  Allocation(std::size_t agents, std::size_t states)
      : agents_(agents), states_(states), shares_(agents * states, 0.0) {}

  explicit Allocation(const std::vector<std::vector<double>>& rows)
      : agents_(rows.size()), states_(rows.empty() ? 0 : rows.front().size()) {
    shares_.reserve(agents_ * states_);
    for (const auto& r : rows) {
      require_same_size("Allocation row", states_, r.size());
      for (double v : r) {
        if (!std::isfinite(v)) throw ValidationError("Allocation: non-finite share");
        shares_.push_back(v);
      }
    }
  }

  std::size_t agents() const noexcept { return agents_; }
  std::size_t states() const noexcept { return states_; }
  double& at(std::size_t a, std::size_t i) { return shares_[a * states_ + i]; }
  double at(std::size_t a, std::size_t i) const { return shares_[a * states_ + i]; }

  Rv row(std::size_t a) const {
    return Rv(std::vector<double>(shares_.begin() + static_cast<std::ptrdiff_t>(a * states_),
                                  shares_.begin() + static_cast<std::ptrdiff_t>((a + 1) * states_)));
  }
  void set_row(std::size_t a, const Rv& r) {
    require_same_size("Allocation::set_row", states_, r.size());
    for (std::size_t i = 0; i < states_; ++i) at(a, i) = r[i];
  }
  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out;
    for (std::size_t a = 0; a < agents_; ++a) out.push_back(row(a).vec());
    return out;
  }

  friend bool operator==(const Allocation&, const Allocation&) = default;

private:
  std::size_t agents_;
  std::size_t states_;
  std::vector<double> shares_;
};

inline void require_allocation_shape(const AgentSpace& agents, const Allocation& alloc, std::size_t states) {
  require_same_size("allocation agents", agents.size(), alloc.agents());
  require_same_size("allocation states", states, alloc.states());
}

/// Sum over atoms of weight times share, in ascending atom order.
inline Rv gelfand_integral(const AgentSpace& agents, const Allocation& alloc) {
  require_same_size("gelfand_integral", agents.size(), alloc.agents());
  std::vector<double> out(alloc.states(), 0.0);
  for (std::size_t a = 0; a < alloc.agents(); ++a)
    for (std::size_t i = 0; i < alloc.states(); ++i) out[i] += agents[a].weight * alloc.at(a, i);
  return Rv(std::move(out));
}

inline constexpr double kFeasibilityTol = 1e-9;

inline bool is_feasible(const AgentSpace& agents, const Allocation& alloc, const Rv& x,
                        double tol = kFeasibilityTol) {
  if (!(tol >= 0.0)) throw ValidationError("is_feasible: tol must be >= 0");
  require_allocation_shape(agents, alloc, x.size());
  return sup_norm(gelfand_integral(agents, alloc) - x) <= tol;
}

inline double total_risk(const AgentSpace& agents, const std::vector<RiskSpec>& family, const ProbSpace& space,
                         const Allocation& alloc) {
  require_same_size("total_risk family", agents.size(), family.size());
  require_allocation_shape(agents, alloc, space.size());
  double s = 0.0;
  for (std::size_t a = 0; a < agents.size(); ++a) s += agents[a].weight * rho(family[a], space, alloc.row(a));
  return s;
}

/// Allocation giving every atom x / mu(A).
inline Allocation proportional_allocation(const AgentSpace& agents, const Rv& x) {
  Allocation out(agents.size(), x.size());
  const Rv share = x / agents.total_mass();
  for (std::size_t a = 0; a < agents.size(); ++a) out.set_row(a, share);
  return out;
}

}  // namespace riskshare

#endif  // RISKSHARE_AGENT_SPACE_HPP
