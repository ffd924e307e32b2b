#ifndef RISKSHARE_INFIMAL_CONVOLUTION_HPP
#define RISKSHARE_INFIMAL_CONVOLUTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskshare/agent_space.hpp"
#include "riskshare/density_search.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/prob_core.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare {

/// rho_a = dilate(base, gamma_a).
struct DilationProfile {
  RiskSpec base;
  std::vector<double> gammas;
};

/// rho_a = inflate(base, gamma_a).
struct InflationProfile {
  RiskSpec base;
  std::vector<double> gammas;
};

struct GeneralFamily {};

using FamilyKind = std::variant<DilationProfile, InflationProfile, GeneralFamily>;

class Market {
public:
  static Market dilation(ProbSpace space, AgentSpace agents, RiskSpec base, std::vector<double> gammas) {
    require_same_size("dilation profile gammas", agents.size(), gammas.size());
    std::vector<RiskSpec> fam;
    for (std::size_t a = 0; a < gammas.size(); ++a) {
      if (!std::isfinite(gammas[a]) || gammas[a] <= 0.0)
        throw ValidationError("dilation profile: gamma of atom '" + agents[a].label + "' must be finite and > 0");
      fam.push_back(dilate(base, gammas[a]));
    }
    return Market(std::move(space), std::move(agents), std::move(fam),
                  DilationProfile{std::move(base), std::move(gammas)});
  }

  static Market inflation(ProbSpace space, AgentSpace agents, RiskSpec base, std::vector<double> gammas) {
    require_same_size("inflation profile gammas", agents.size(), gammas.size());
    std::vector<RiskSpec> fam;
    for (std::size_t a = 0; a < gammas.size(); ++a) {
      if (!std::isfinite(gammas[a]) || gammas[a] < 1.0)
        throw ValidationError("inflation profile: gamma of atom '" + agents[a].label + "' must be finite and >= 1");
      fam.push_back(inflate(base, gammas[a]));
    }
    return Market(std::move(space), std::move(agents), std::move(fam),
                  InflationProfile{std::move(base), std::move(gammas)});
  }

  static Market general(ProbSpace space, AgentSpace agents, std::vector<RiskSpec> family) {
    require_same_size("risk family", agents.size(), family.size());
    return Market(std::move(space), std::move(agents), std::move(family), GeneralFamily{});
  }

  const ProbSpace& space() const noexcept { return space_; }
  const AgentSpace& agents() const noexcept { return agents_; }
  const std::vector<RiskSpec>& family() const noexcept { return family_; }
  const FamilyKind& kind() const noexcept { return kind_; }

  bool is_dilation() const noexcept { return std::holds_alternative<DilationProfile>(kind_); }
  bool is_inflation() const noexcept { return std::holds_alternative<InflationProfile>(kind_); }
  bool is_general() const noexcept { return std::holds_alternative<GeneralFamily>(kind_); }

  /// Sum of w_a gamma_a for dilation profiles, min gamma_a for inflation profiles.
  double big_gamma() const {
    if (const auto* d = std::get_if<DilationProfile>(&kind_)) {
      double s = 0.0;
      for (std::size_t a = 0; a < d->gammas.size(); ++a) s += agents_[a].weight * d->gammas[a];
      return s;
    }
    if (const auto* f = std::get_if<InflationProfile>(&kind_))
      return *std::min_element(f->gammas.begin(), f->gammas.end());
    throw UnsupportedError("big_gamma: general families have no profile parameter");
  }

private:
  Market(ProbSpace space, AgentSpace agents, std::vector<RiskSpec> family, FamilyKind kind)
      : space_(std::move(space)), agents_(std::move(agents)), family_(std::move(family)), kind_(std::move(kind)) {}

  ProbSpace space_;
  AgentSpace agents_;
  std::vector<RiskSpec> family_;
  FamilyKind kind_;
};

enum class Attainment { attained, not_attained, unknown };

inline const char* to_string(Attainment a) {
  switch (a) {
    case Attainment::attained: return "attained";
    case Attainment::not_attained: return "not_attained";
    case Attainment::unknown: return "unknown";
  }
  return "unknown";
}

struct ShareResult {
  double value = 0.0;
  std::optional<Allocation> allocation;
  Attainment attained = Attainment::unknown;
  std::optional<std::vector<double>> dual_optimizer;
  double duality_gap = 0.0;
};

/// Sum over atoms of w_a * conjugate_a(q); infinity absorbs.
inline Penalty aggregate_conjugate(const Market& m, const Density& q) {
  Penalty total = Penalty::zero();
  for (std::size_t a = 0; a < m.agents().size(); ++a) {
    total = total + m.agents()[a].weight * conjugate(m.family()[a], m.space(), q);
    if (total.is_infinite()) return total;
  }
  return total;
}

inline Allocation optimal_allocation_dilated(const Market& m, const Rv& x) {
  const auto* d = std::get_if<DilationProfile>(&m.kind());
  if (!d) throw UnsupportedError("optimal_allocation_dilated: market is not a dilation profile");
  require_same_size("optimal_allocation_dilated", m.space().size(), x.size());
  const double big = m.big_gamma();
  Allocation out(m.agents().size(), x.size());
  for (std::size_t a = 0; a < m.agents().size(); ++a) out.set_row(a, (d->gammas[a] / big) * x);
  return out;
}

inline Allocation optimal_allocation_inflated(const Market& m, const Rv& x) {
  const auto* f = std::get_if<InflationProfile>(&m.kind());
  if (!f) throw UnsupportedError("optimal_allocation_inflated: market is not an inflation profile");
  require_same_size("optimal_allocation_inflated", m.space().size(), x.size());
  const double gmin = m.big_gamma();
  double mass = 0.0;
  for (std::size_t a = 0; a < f->gammas.size(); ++a)
    if (f->gammas[a] == gmin) mass += m.agents()[a].weight;
  Allocation out(m.agents().size(), x.size());
  const Rv share = x / mass;
  for (std::size_t a = 0; a < f->gammas.size(); ++a)
    if (f->gammas[a] == gmin) out.set_row(a, share);
  return out;
}

namespace detail {

inline double dual_objective(const Market& m, const Rv& x, const std::vector<double>& q) {
  const Density d(m.space(), q);
  const Penalty pen = aggregate_conjugate(m, d);
  if (pen.is_infinite()) return -std::numeric_limits<double>::infinity();
  return expect_under(m.space(), d, x) - pen.value();
}

// The aggregate penalty of a general family is C * KL plus the indicator of the
// intersection of every coherent atom's (inflated) hull.
inline std::pair<DensityObjective, DensityConstraints> general_dual_problem(const Market& m, const Rv& x) {
  DensityObjective obj{x.vec(), 0.0};
  DensityConstraints cons;
  double box = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < m.agents().size(); ++a) {
    const DualForm f = dual_form(m.family()[a], m.space());
    obj.entropic_weight += m.agents()[a].weight * f.entropic_weight;
    if (!f.hull) continue;
    if (f.box_only()) {
      box = std::min(box, f.hull->factor);
    } else if (std::find(cons.hulls.begin(), cons.hulls.end(), *f.hull) == cons.hulls.end()) {
      cons.hulls.push_back(*f.hull);
    }
  }
  if (std::isfinite(box)) cons.upper.assign(m.space().size(), box);
  return {std::move(obj), std::move(cons)};
}

inline void finish_gap(const Market& m, const Rv& x, ShareResult& r) {
  const double dual = dual_objective(m, x, *r.dual_optimizer);
  const double gap = r.value - dual;
  // Noise down to -1e-9 reads as zero; anything below is reported as is.
  r.duality_gap = gap >= -1e-9 ? std::max(gap, 0.0) : gap;
}

}  // namespace detail

/// The integral infimal convolution of the market's family at x.
///
/// Profile families use their closed forms and come with an optimal
/// allocation. General families are solved through the dual and report
/// attainment as unknown. Throws IllPosedError when no density has finite
/// aggregate penalty.
inline ShareResult value(const Market& m, const Rv& x) {
  require_same_size("value", m.space().size(), x.size());
  ShareResult r;
  if (const auto* d = std::get_if<DilationProfile>(&m.kind())) {
    const RhoResult rr = rho_with_dual(dilate(d->base, m.big_gamma()), m.space(), x);
    r.value = rr.value;
    r.allocation = optimal_allocation_dilated(m, x);
    r.attained = Attainment::attained;
    r.dual_optimizer = rr.optimizer;
  } else if (const auto* f = std::get_if<InflationProfile>(&m.kind())) {
    const RhoResult rr = rho_with_dual(inflate(f->base, m.big_gamma()), m.space(), x);
    r.value = rr.value;
    r.allocation = optimal_allocation_inflated(m, x);
    r.attained = Attainment::attained;
    r.dual_optimizer = rr.optimizer;
  } else {
    auto [obj, cons] = detail::general_dual_problem(m, x);
    const DensitySearchResult sr = maximize_over_densities(m.space(), obj, cons);
    r.value = sr.score;
    r.attained = Attainment::unknown;
    r.dual_optimizer = sr.q;
  }
  detail::finish_gap(m, x, r);
  return r;
}

inline bool acceptance_member(const Market& m, const Rv& x, double tol) {
  if (!(tol >= 0.0)) throw ValidationError("acceptance_member: tol must be >= 0");
  return value(m, x).value <= tol;
}

/// Gelfand integrals of random per-atom positions, each shifted into its
/// atom's acceptance set by subtracting its own risk.
inline std::vector<Rv> aumann_acceptance_sample(const Market& m, std::size_t n_samples, std::uint64_t seed,
                                                double scale = 1.0) {
  if (n_samples == 0) throw ValidationError("aumann_acceptance_sample: n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  const std::size_t n = m.space().size();
  std::vector<Rv> out;
  out.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Allocation y(m.agents().size(), n);
    for (std::size_t a = 0; a < m.agents().size(); ++a) {
      std::vector<double> draw(n);
      for (double& v : draw) v = u(rng);
      const Rv xa(std::move(draw));
      y.set_row(a, xa - rho(m.family()[a], m.space(), xa));
    }
    out.push_back(gelfand_integral(m.agents(), y));
  }
  return out;
}

/// Risk-aversion profile t -> gamma(t) on (0, 1] whose essential infimum is
/// `ess_inf` but need not be attained.
struct GammaProfile {
  std::function<double(double)> gamma;
  double ess_inf;
};

struct NonattainmentRow {
  std::size_t n;
  double value;
  double gap;
};

struct NonattainmentReport {
  std::vector<NonattainmentRow> rows;
  double limit_value = 0.0;
  /// Some gamma' above the infimum yields a different inflated value; when
  /// false the experiment carries no information.
  bool hypothesis_holds = false;
};

/// Discretizes the profile with n midpoint atoms for each n in `refinements`
/// and compares the discrete value with its continuum limit rho(inflate(base, Gamma)).
inline NonattainmentReport nonattainment_experiment(const RiskSpec& base, const GammaProfile& profile,
                                                    const ProbSpace& space, const Rv& x,
                                                    const std::vector<std::size_t>& refinements) {
  if (refinements.empty()) throw ValidationError("nonattainment_experiment: refinements must be nonempty");
  if (!(profile.ess_inf >= 1.0)) throw ValidationError("nonattainment_experiment: ess-inf Gamma must be >= 1");
  NonattainmentReport rep;
  rep.limit_value = rho(inflate(base, profile.ess_inf), space, x);
  double gamma_prime = profile.ess_inf;
  for (std::size_t n : refinements) {
    AgentSpace agents = AgentSpace::lebesgue(n);
    std::vector<double> gammas(n);
    for (std::size_t a = 0; a < n; ++a) {
      gammas[a] = profile.gamma(agents[a].position);
      if (!(gammas[a] > profile.ess_inf))
        throw ValidationError("nonattainment_experiment: gamma at atom '" + agents[a].label +
                              "' must exceed the ess-inf");
      gamma_prime = std::max(gamma_prime, gammas[a]);
    }
    const Market m = Market::inflation(space, std::move(agents), base, std::move(gammas));
    const double v = value(m, x).value;
    rep.rows.push_back({n, v, v - rep.limit_value});
  }
  rep.hypothesis_holds = std::abs(rho(inflate(base, gamma_prime), space, x) - rep.limit_value) > 1e-9;
  return rep;
}

}  // namespace riskshare

#endif  // RISKSHARE_INFIMAL_CONVOLUTION_HPP
