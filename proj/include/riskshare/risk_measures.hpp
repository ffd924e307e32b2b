#ifndef RISKSHARE_RISK_MEASURES_HPP
#define RISKSHARE_RISK_MEASURES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskshare/density_search.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/prob_core.hpp"

namespace riskshare {

struct RiskNode;

/// Immutable handle to a risk-measure description. Cheap to copy.
class RiskSpec {
public:
  static RiskSpec entropic(double gamma);
  static RiskSpec expected_shortfall(double alpha);
  /// ES at level 1, i.e. E^P.
  static RiskSpec expectation() { return expected_shortfall(1.0); }
  static RiskSpec scenario_set(std::vector<Density> densities);

  const RiskNode& node() const { return *node_; }

  explicit RiskSpec(std::shared_ptr<const RiskNode> n) : node_(std::move(n)) {}

private:
  std::shared_ptr<const RiskNode> node_;
};

struct Entropic {
  double gamma;
};
struct ExpectedShortfall {
  double alpha;
};
struct ScenarioSet {
  std::vector<Density> densities;
};
struct Dilation {
  RiskSpec base;
  double gamma;
};
struct Inflation {
  RiskSpec base;
  double gamma;
};

struct RiskNode {
  std::variant<Entropic, ExpectedShortfall, ScenarioSet, Dilation, Inflation> v;
};

inline RiskSpec RiskSpec::entropic(double gamma) {
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ValidationError("Entropic: gamma must be finite and > 0");
  return RiskSpec(std::make_shared<const RiskNode>(RiskNode{Entropic{gamma}}));
}

inline RiskSpec RiskSpec::expected_shortfall(double alpha) {
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha > 1.0)
    throw ValidationError("ExpectedShortfall: alpha must lie in (0, 1]");
  return RiskSpec(std::make_shared<const RiskNode>(RiskNode{ExpectedShortfall{alpha}}));
}

inline RiskSpec RiskSpec::scenario_set(std::vector<Density> densities) {
  if (densities.empty()) throw ValidationError("ScenarioSet: at least one density is required");
  for (const auto& d : densities)
    require_same_size("ScenarioSet member", densities.front().size(), d.size());
  return RiskSpec(std::make_shared<const RiskNode>(RiskNode{ScenarioSet{std::move(densities)}}));
}

inline bool is_coherent(const RiskSpec& s) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Entropic>) return false;
        else if constexpr (std::is_same_v<T, Dilation>) return is_coherent(n.base);
        else return true;
      },
      s.node().v);
}

/// gamma-dilation. Scenario sets are returned unchanged since they are
/// positively homogeneous.
inline RiskSpec dilate(const RiskSpec& spec, double gamma) {
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ValidationError("dilate: gamma must be finite and > 0");
  if (std::holds_alternative<ScenarioSet>(spec.node().v)) return spec;
  return RiskSpec(std::make_shared<const RiskNode>(RiskNode{Dilation{spec, gamma}}));
}

/// gamma-inflation of a coherent measure.
inline RiskSpec inflate(const RiskSpec& spec, double gamma) {
  if (!std::isfinite(gamma) || gamma < 1.0) throw ValidationError("inflate: gamma must be finite and >= 1");
  if (!is_coherent(spec))
    throw ValidationError("inflate: base must be coherent (scenario set, expected shortfall, or an inflation)");
  return RiskSpec(std::make_shared<const RiskNode>(RiskNode{Inflation{spec, gamma}}));
}

/// Conjugate value in [0, +inf]. Infinity is a flag, not a large number.
class Penalty {
public:
  Penalty() = default;
  explicit Penalty(double v) : value_(v) {
    if (std::isnan(v)) throw ValidationError("Penalty: NaN");
    if (std::isinf(v)) infinite_ = true;
  }
  static Penalty infinity() {
    Penalty p;
    p.infinite_ = true;
    return p;
  }
  static Penalty zero() { return Penalty(0.0); }

  bool is_infinite() const noexcept { return infinite_; }
  bool is_finite() const noexcept { return !infinite_; }
  /// Finite value; throws if infinite.
  double value() const {
    if (infinite_) throw std::logic_error("Penalty::value on an infinite penalty");
    return value_;
  }
  /// +inf as a double, for reporting.
  double as_double() const noexcept { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  friend Penalty operator+(const Penalty& a, const Penalty& b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return Penalty(a.value_ + b.value_);
  }
  /// Scaling by a positive weight.
  friend Penalty operator*(double w, const Penalty& a) {
    if (a.infinite_) return infinity();
    return Penalty(w * a.value_);
  }

private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Every variant is, on a finite space, x -> sup_q (E^q[x] - c KL(q) - indicator_H(q))
/// with H the (possibly inflated) hull of a generator set, or no hull at all.
struct DualForm {
  double entropic_weight = 0.0;
  std::optional<InflatedHull> hull;

  /// Hull generated by the all-ones density alone: the box q <= factor.
  bool box_only() const {
    if (!hull || hull->generators.size() != 1) return false;
    const auto& g = hull->generators.front();
    return std::all_of(g.begin(), g.end(), [](double v) { return v == 1.0; });
  }
};

inline DualForm dual_form(const RiskSpec& spec, const ProbSpace& space) {
  return std::visit(
      [&](const auto& n) -> DualForm {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Entropic>) {
          return {n.gamma, std::nullopt};
        } else if constexpr (std::is_same_v<T, ExpectedShortfall>) {
          return {0.0, InflatedHull{1.0 / n.alpha, {std::vector<double>(space.size(), 1.0)}}};
        } else if constexpr (std::is_same_v<T, ScenarioSet>) {
          InflatedHull h{1.0, {}};
          for (const auto& d : n.densities) {
            require_same_size("ScenarioSet member", space.size(), d.size());
            double mass = 0.0;
            for (std::size_t i = 0; i < d.size(); ++i) mass += space[i] * d[i];
            if (std::abs(mass - 1.0) > kDensityTol)
              throw ValidationError("ScenarioSet member is not a density under this probability space");
            h.generators.push_back(d.vec());
          }
          return {0.0, std::move(h)};
        } else if constexpr (std::is_same_v<T, Dilation>) {
          DualForm f = dual_form(n.base, space);
          f.entropic_weight *= n.gamma;
          return f;
        } else {
          DualForm f = dual_form(n.base, space);
          if (f.entropic_weight != 0.0 || !f.hull)
            throw ValidationError("inflate: base must be coherent");
          f.hull->factor *= n.gamma;
          return f;
        }
      },
      spec.node().v);
}

struct RhoResult {
  double value;
  /// A maximizer of E^q[x] - conjugate(q).
  std::vector<double> optimizer;
};

/// Expected shortfall by the sorting rule: states ordered by loss (descending,
/// ties by index) absorb density 1/alpha until mass alpha is used up; the
/// boundary state takes the fractional remainder.
inline RhoResult expected_shortfall_sorted(const ProbSpace& space, double alpha, const Rv& x) {
  require_same_size("expected shortfall", space.size(), x.size());
  const std::size_t n = x.size();
  if (alpha == 1.0) return {expect(space, x), std::vector<double>(n, 1.0)};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  std::vector<double> q(n, 0.0);
  double remaining = alpha;
  double acc = 0.0;
  for (std::size_t k = 0; k < n && remaining > 0.0; ++k) {
    const std::size_t i = order[k];
    const double take = std::min(space[i], remaining);
    q[i] = take / (alpha * space[i]);
    acc += take * x[i];
    remaining -= take;
  }
  return {acc / alpha, std::move(q)};
}

inline RhoResult rho_with_dual(const RiskSpec& spec, const ProbSpace& space, const Rv& x);

namespace detail {

inline RhoResult entropic_rho(const ProbSpace& space, double gamma, const Rv& x) {
  const double m = *std::max_element(x.vec().begin(), x.vec().end());
  std::vector<double> w(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    w[i] = std::exp((x[i] - m) / gamma);
    z += space[i] * w[i];
  }
  for (double& v : w) v /= z;
  return {m + gamma * std::log(z), std::move(w)};
}

inline RhoResult hull_rho(const ProbSpace& space, const InflatedHull& hull, const Rv& x) {
  DensityConstraints cons;
  cons.hulls.push_back(hull);
  const auto r = maximize_over_densities(space, DensityObjective{x.vec(), 0.0}, cons);
  return {r.score, r.q};
}

}  // namespace detail

/// rho(x) together with a dual optimizer.
inline RhoResult rho_with_dual(const RiskSpec& spec, const ProbSpace& space, const Rv& x) {
  require_same_size("rho", space.size(), x.size());
  return std::visit(
      [&](const auto& n) -> RhoResult {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Entropic>) {
          return detail::entropic_rho(space, n.gamma, x);
        } else if constexpr (std::is_same_v<T, ExpectedShortfall>) {
          return expected_shortfall_sorted(space, n.alpha, x);
        } else if constexpr (std::is_same_v<T, ScenarioSet>) {
          (void)dual_form(spec, space);  // validates members against this space
          std::size_t best = 0;
          double best_v = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < n.densities.size(); ++k) {
            const double v = expect_under(space, n.densities[k], x);
            if (v > best_v) {
              best_v = v;
              best = k;
            }
          }
          return {best_v, n.densities[best].vec()};
        } else if constexpr (std::is_same_v<T, Dilation>) {
          RhoResult r = rho_with_dual(n.base, space, x / n.gamma);
          r.value *= n.gamma;
          return r;
        } else {
          const DualForm f = dual_form(spec, space);
          if (f.box_only()) return expected_shortfall_sorted(space, 1.0 / f.hull->factor, x);
          return detail::hull_rho(space, *f.hull, x);
        }
      },
      spec.node().v);
}

inline double rho(const RiskSpec& spec, const ProbSpace& space, const Rv& x) {
  return rho_with_dual(spec, space, x).value;
}

/// Membership cutoff shared by the coherent conjugates.
inline constexpr double kHullTol = 1e-9;

inline bool in_inflated_hull(const ProbSpace& space, const Density& q, const InflatedHull& hull) {
  const bool box = hull.generators.size() == 1 &&
                   std::all_of(hull.generators[0].begin(), hull.generators[0].end(),
                               [](double v) { return v == 1.0; });
  if (box) {
    const double top = *std::max_element(q.vec().begin(), q.vec().end());
    return top <= hull.factor + kHullTol;
  }
  return inflated_hull_violation(space, q.values(), hull) <= kHullTol;
}

/// Convex conjugate (penalty) of `spec` at the density q.
inline Penalty conjugate(const RiskSpec& spec, const ProbSpace& space, const Density& q) {
  require_same_size("conjugate", space.size(), q.size());
  const DualForm f = dual_form(spec, space);
  if (f.hull && !in_inflated_hull(space, q, *f.hull)) return Penalty::infinity();
  if (f.entropic_weight == 0.0) return Penalty::zero();
  return Penalty(f.entropic_weight * kl_divergence(space, q));
}

/// rho(inflate(spec, gamma), x) along an ascending grid of gammas.
inline std::vector<std::pair<double, double>> left_continuity_sweep(const RiskSpec& spec, const ProbSpace& space,
                                                                    const Rv& x, const std::vector<double>& gammas) {
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    if (!(gammas[k] >= 1.0)) throw ValidationError("left_continuity_sweep: grid values must be >= 1");
    if (k > 0 && !(gammas[k] > gammas[k - 1]))
      throw ValidationError("left_continuity_sweep: grid must be strictly ascending");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(gammas.size());
  for (double g : gammas) out.emplace_back(g, rho(inflate(spec, g), space, x));
  return out;
}

/// One-sided estimate of lim_{g -> gamma-} rho(inflate(spec, g), x) from the two
/// grid points gamma - h and gamma - 2h. The inflated value is piecewise linear
/// in gamma, so the linear extrapolation is exact away from kinks.
inline double left_limit_estimate(const RiskSpec& spec, const ProbSpace& space, const Rv& x, double gamma,
                                  double h) {
  if (!(h > 0.0) || gamma - 2.0 * h < 1.0)
    throw ValidationError("left_limit_estimate: need gamma - 2h >= 1 and h > 0");
  const double v1 = rho(inflate(spec, gamma - h), space, x);
  const double v2 = rho(inflate(spec, gamma - 2.0 * h), space, x);
  return 2.0 * v1 - v2;
}

}  // namespace riskshare

#endif  // RISKSHARE_RISK_MEASURES_HPP
