#ifndef RISKSHARE_MARKET_IO_HPP
#define RISKSHARE_MARKET_IO_HPP

// JSON market specifications.
//
//   {
//     "probabilities": [p_1, ..., p_n],
//     "loss": [x_1, ..., x_n],
//     "agents": {
//       "family": "general" | "dilation" | "inflation",
//       "atoms": [ {"label": "a1", "weight": 1, "risk": RISK} ...]     (general)
//       "atoms": [ {"label": "a1", "weight": 1, "gamma": 2} ...]       (profiles)
//       "space": {"type": "finite" | "lebesgue" | "shapley", "n": N},  (instead of atoms)
//       "gamma": {"formula": "affine", "intercept": a, "slope": b},    (with "space")
//       "base": RISK                                                   (profiles)
//     },
//     "base": RISK                                                     (optional, for sweep)
//   }
//
// RISK is one of
//   {"type": "entropic", "gamma": g}
//   {"type": "expected_shortfall", "alpha": a}
//   {"type": "expectation"}
//   {"type": "scenario_set", "densities": [[...], ...]}
//   {"type": "dilation", "base": RISK, "gamma": g}
//   {"type": "inflation", "base": RISK, "gamma": g}
//
// With "space", atom positions t feed gamma(t) = intercept + slope * t; finite
// spaces use t = 1, 2, ..., n.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "riskshare/agent_space.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/infimal_convolution.hpp"
#include "riskshare/prob_core.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare::io {

using json = nlohmann::json;

struct AffineGamma {
  double intercept;
  double slope;
  double operator()(double t) const { return intercept + slope * t; }
};

struct MarketSpec {
  ProbSpace space;
  Rv loss;
  Market market;
  std::optional<RiskSpec> base;
  /// "finite", "lebesgue" or "shapley" when generated from a named space.
  std::string space_type;
  std::optional<AffineGamma> gamma_formula;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& msg) {
  throw ValidationError(where + ": " + msg);
}

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where + "." + key, "missing");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "must be finite");
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

inline std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 1) fail(where, "expected a positive integer");
  return static_cast<std::size_t>(j.get<long long>());
}

}  // namespace detail

inline RiskSpec parse_risk(const json& j, const ProbSpace& space, const std::string& where) {
  using namespace detail;
  const std::string type = text(field(j, "type", where), where + ".type");
  try {
    if (type == "entropic") return RiskSpec::entropic(number(field(j, "gamma", where), where + ".gamma"));
    if (type == "expected_shortfall")
      return RiskSpec::expected_shortfall(number(field(j, "alpha", where), where + ".alpha"));
    if (type == "expectation") return RiskSpec::expectation();
    if (type == "scenario_set") {
      const json& ds = field(j, "densities", where);
      if (!ds.is_array() || ds.empty()) fail(where + ".densities", "expected a nonempty array");
      std::vector<Density> members;
      for (std::size_t k = 0; k < ds.size(); ++k) {
        const std::string w = where + ".densities[" + std::to_string(k) + "]";
        try {
          members.emplace_back(space, numbers(ds[k], w));
        } catch (const ValidationError& e) {
          if (std::string(e.what()).rfind(w, 0) == 0) throw;
          fail(w, e.what());
        }
      }
      return RiskSpec::scenario_set(std::move(members));
    }
    if (type == "dilation")
      return dilate(parse_risk(field(j, "base", where), space, where + ".base"),
                    number(field(j, "gamma", where), where + ".gamma"));
    if (type == "inflation")
      return inflate(parse_risk(field(j, "base", where), space, where + ".base"),
                     number(field(j, "gamma", where), where + ".gamma"));
  } catch (const ValidationError& e) {
    if (std::string(e.what()).rfind(where, 0) == 0) throw;
    fail(where, e.what());
  }
  fail(where + ".type", "unknown risk type '" + type + "'");
}

inline MarketSpec parse_market(const json& j) {
  using namespace detail;
  if (!j.is_object()) fail("spec", "expected a JSON object");

  std::optional<ProbSpace> space;
  try {
    space.emplace(numbers(field(j, "probabilities", "spec"), "probabilities"));
  } catch (const ValidationError& e) {
    if (std::string(e.what()).rfind("probabilities", 0) == 0) throw;
    fail("probabilities", e.what());
  }
  std::vector<double> loss_v = numbers(field(j, "loss", "spec"), "loss");
  if (loss_v.size() != space->size())
    fail("loss", "has " + std::to_string(loss_v.size()) + " entries but there are " +
                     std::to_string(space->size()) + " states");
  Rv loss(std::move(loss_v));

  const json& ag = field(j, "agents", "spec");
  const std::string family = text(field(ag, "family", "agents"), "agents.family");
  if (family != "general" && family != "dilation" && family != "inflation")
    fail("agents.family", "expected 'general', 'dilation' or 'inflation', got '" + family + "'");
  const bool profile = family != "general";

  std::optional<RiskSpec> base;
  if (ag.contains("base")) base = parse_risk(ag["base"], *space, "agents.base");
  if (profile && !base) fail("agents.base", "missing (required for a " + family + " profile)");

  std::vector<Atom> atoms;
  std::vector<double> gammas;
  std::vector<RiskSpec> risks;
  std::string space_type;
  std::optional<AffineGamma> formula;

  const bool has_atoms = ag.contains("atoms");
  const bool has_space = ag.contains("space");
  if (has_atoms == has_space) fail("agents", "give exactly one of 'atoms' or 'space'");

  if (has_atoms) {
    const json& arr = ag["atoms"];
    if (!arr.is_array() || arr.empty()) fail("agents.atoms", "expected a nonempty array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const json& a = arr[k];
      std::string label = "a" + std::to_string(k + 1);
      const std::string idx = "agents.atoms[" + std::to_string(k) + "]";
      if (a.is_object() && a.contains("label")) label = text(a["label"], idx + ".label");
      const std::string where = idx + " (atom '" + label + "')";
      const double w = number(field(a, "weight", where), where + ".weight");
      if (w <= 0.0) fail(where + ".weight", "must be > 0, got " + json(w).dump());
      atoms.push_back({label, w});
      if (profile) {
        const double g = number(field(a, "gamma", where), where + ".gamma");
        if (family == "dilation" && g <= 0.0) fail(where + ".gamma", "must be > 0");
        if (family == "inflation" && g < 1.0) fail(where + ".gamma", "must be >= 1");
        gammas.push_back(g);
      } else {
        risks.push_back(parse_risk(field(a, "risk", where), *space, where + ".risk"));
      }
    }
  } else {
    if (!profile) fail("agents.space", "named spaces need a dilation or inflation profile");
    const json& sp = ag["space"];
    space_type = text(field(sp, "type", "agents.space"), "agents.space.type");
    const std::size_t n = count(field(sp, "n", "agents.space"), "agents.space.n");
    std::optional<AgentSpace> gen;
    if (space_type == "finite") gen = AgentSpace::finite(n);
    else if (space_type == "lebesgue") gen = AgentSpace::lebesgue(n);
    else if (space_type == "shapley") gen = AgentSpace::shapley(n);
    else fail("agents.space.type", "expected 'finite', 'lebesgue' or 'shapley', got '" + space_type + "'");
    const json& gf = field(ag, "gamma", "agents");
    const std::string kind = text(field(gf, "formula", "agents.gamma"), "agents.gamma.formula");
    if (kind != "affine") fail("agents.gamma.formula", "only 'affine' is supported");
    formula = AffineGamma{number(field(gf, "intercept", "agents.gamma"), "agents.gamma.intercept"),
                          number(field(gf, "slope", "agents.gamma"), "agents.gamma.slope")};
    atoms = gen->atoms();
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const double t = space_type == "finite" ? static_cast<double>(k + 1) : atoms[k].position;
      const double g = (*formula)(t);
      const std::string where = "agents.gamma (atom '" + atoms[k].label + "')";
      if (family == "dilation" && !(g > 0.0)) fail(where, "evaluates to " + json(g).dump() + ", must be > 0");
      if (family == "inflation" && !(g >= 1.0)) fail(where, "evaluates to " + json(g).dump() + ", must be >= 1");
      gammas.push_back(g);
    }
  }

  AgentSpace agents(std::move(atoms));
  std::optional<RiskSpec> top_base;
  if (j.contains("base")) top_base = parse_risk(j["base"], *space, "base");

  auto build = [&]() {
    if (family == "dilation") return Market::dilation(*space, agents, *base, gammas);
    if (family == "inflation") return Market::inflation(*space, agents, *base, gammas);
    return Market::general(*space, agents, risks);
  };
  return MarketSpec{*space, loss, build(), top_base ? top_base : base, space_type, formula};
}

/// Allocation rows from either {"rows": [[...]]} or a result record with an
/// "allocation" member.
inline Allocation parse_allocation(const json& j, std::size_t agents, std::size_t states) {
  using namespace detail;
  const json* src = &j;
  if (j.is_object() && j.contains("allocation")) src = &j["allocation"];
  const json& rows = field(*src, "rows", "allocation");
  if (!rows.is_array()) fail("allocation.rows", "expected an array of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.push_back(numbers(rows[k], "allocation.rows[" + std::to_string(k) + "]"));
  if (out.size() != agents)
    fail("allocation.rows", "has " + std::to_string(out.size()) + " rows, market has " + std::to_string(agents) +
                                " atoms");
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out[k].size() != states)
      fail("allocation.rows[" + std::to_string(k) + "]", "expected " + std::to_string(states) + " entries");
  return Allocation(out);
}

inline json allocation_json(const AgentSpace& agents, const Allocation& a) {
  json labels = json::array();
  for (const auto& at : agents.atoms()) labels.push_back(at.label);
  return json{{"labels", labels}, {"rows", a.rows()}};
}

}  // namespace riskshare::io

#endif  // RISKSHARE_MARKET_IO_HPP
