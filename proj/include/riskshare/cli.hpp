#ifndef RISKSHARE_CLI_HPP
#define RISKSHARE_CLI_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "riskshare/errors.hpp"
#include "riskshare/infimal_convolution.hpp"
#include "riskshare/market_io.hpp"
#include "riskshare/pareto.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,
  kNonConvergence = 3,
  kIllPosed = 4,
  kUnsupported = 5,
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(std::string(what) + ": cannot read '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string(what) + ": invalid JSON (" + e.what() + ")");
  }
}

/// Comma-separated numbers, or start:step:stop (inclusive, step > 0).
inline std::vector<double> parse_grid(const std::string& s) {
  auto num = [](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size() || !std::isfinite(v))
      throw ValidationError("--gamma-grid: '" + t + "' is not a number");
    return v;
  };
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("--gamma-grid: range form is start:step:stop");
    const double a = num(parts[0]), h = num(parts[1]), b = num(parts[2]);
    if (!(h > 0.0) || b < a) throw ValidationError("--gamma-grid: need step > 0 and stop >= start");
    const auto steps = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
    for (std::size_t k = 0; k <= steps; ++k) out.push_back(a + static_cast<double>(k) * h);
    return out;
  }
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
  if (out.empty()) throw ValidationError("--gamma-grid: empty grid");
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) {
    if (p.empty() || p.find_first_not_of("0123456789") != std::string::npos || std::stoull(p) == 0)
      throw ValidationError("--refinements: '" + p + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(std::stoull(p)));
  }
  if (out.empty()) throw ValidationError("--refinements: empty list");
  return out;
}

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Options {
  std::string command;
  std::string spec_path;
  std::string out_path;
  std::string alloc_path;
  std::string gamma_grid;
  std::string refinements = "10,100,1000";
  std::uint64_t seed = 0;
  double tol = kParetoTol;
};

class Runner {
public:
  Runner(Options o, std::ostream& err) : o_(std::move(o)), err_(err) {}

  int run() {
    const std::string spec_text = read_file(o_.spec_path, "--spec");
    std::string digest_input = "riskshare\n" + o_.command + "\n" + spec_text + "\n" + "seed=" +
                               std::to_string(o_.seed) + "\ntol=" + g17(o_.tol) + "\n";
    if (o_.command == "sweep") digest_input += "gamma-grid=" + o_.gamma_grid + "\n";
    if (o_.command == "nonattain") digest_input += "refinements=" + o_.refinements + "\n";
    std::string alloc_text;
    if (o_.command == "pareto") {
      alloc_text = read_file(o_.alloc_path, "--alloc");
      digest_input += "alloc=" + alloc_text + "\n";
    }
    digest_ = sha256_hex(digest_input);
    const io::MarketSpec spec = io::parse_market(parse_json(spec_text, "--spec"));

    if (o_.command == "value") return cmd_value(spec);
    if (o_.command == "allocate") return cmd_allocate(spec);
    if (o_.command == "pareto") return cmd_pareto(spec, parse_json(alloc_text, "--alloc"));
    if (o_.command == "sweep") return cmd_sweep(spec);
    return cmd_nonattain(spec);
  }

private:
  nlohmann::json header() const {
    return {{"command", o_.command}, {"input_digest", digest_}, {"seed", o_.seed}};
  }

  void emit(const std::string& text) const {
    if (o_.out_path.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream out(o_.out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("--out: cannot write '" + o_.out_path + "'");
    out << text;
  }

  void emit_json(const nlohmann::json& j) const { emit(j.dump(2) + "\n"); }

  int cmd_value(const io::MarketSpec& s) {
    const ShareResult r = value(s.market, s.loss);
    auto j = header();
    j["value"] = r.value;
    j["attained"] = to_string(r.attained);
    j["duality_gap"] = r.duality_gap;
    if (r.dual_optimizer) j["dual_optimizer"] = *r.dual_optimizer;
    if (r.allocation) j["allocation"] = io::allocation_json(s.market.agents(), *r.allocation);
    emit_json(j);
    return kOk;
  }

  int cmd_allocate(const io::MarketSpec& s) {
    if (s.market.is_general())
      throw UnsupportedError("allocate: general families have no closed-form optimal allocation");
    const ShareResult r = value(s.market, s.loss);
    const double tr = total_risk(s.market.agents(), s.market.family(), s.market.space(), *r.allocation);
    auto j = header();
    j["value"] = r.value;
    j["attained"] = to_string(r.attained);
    j["allocation"] = io::allocation_json(s.market.agents(), *r.allocation);
    j["certificate"] = {{"total_risk", tr},
                        {"value", r.value},
                        {"gap", tr - r.value},
                        {"feasible", is_feasible(s.market.agents(), *r.allocation, s.loss)}};
    emit_json(j);
    return kOk;
  }

  int cmd_pareto(const io::MarketSpec& s, const nlohmann::json& alloc_json) {
    const Allocation alloc = io::parse_allocation(alloc_json, s.market.agents().size(), s.space.size());
    const ParetoVerdict v = pareto_check(s.market, s.loss, alloc, o_.tol);
    auto j = header();
    j["verdict"] = v.efficient ? "efficient" : "inefficient";
    j["excess"] = v.excess;
    j["total_risk"] = v.total_risk;
    j["value"] = v.value;
    j["tol"] = o_.tol;
    if (v.witness) j["witness"] = io::allocation_json(s.market.agents(), *v.witness);
    emit_json(j);
    return kOk;
  }

  std::string csv_preamble() const {
    return "# command=" + o_.command + " sha256=" + digest_ + " seed=" + std::to_string(o_.seed) +
           "\nparameter,value,gap\n";
  }

  int cmd_sweep(const io::MarketSpec& s) {
    if (o_.gamma_grid.empty()) throw ValidationError("--gamma-grid: required for sweep");
    if (!s.base) throw ValidationError("base: sweep needs a top-level 'base' or 'agents.base'");
    const auto rows = left_continuity_sweep(*s.base, s.space, s.loss, parse_grid(o_.gamma_grid));
    std::string out = csv_preamble();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double gap = k == 0 ? 0.0 : rows[k].second - rows[k - 1].second;
      out += g17(rows[k].first) + "," + g17(rows[k].second) + "," + g17(gap) + "\n";
    }
    emit(out);
    return kOk;
  }

  int cmd_nonattain(const io::MarketSpec& s) {
    if (!s.market.is_inflation() || s.space_type != "lebesgue" || !s.gamma_formula)
      throw ValidationError("agents: nonattain needs an inflation profile on a named 'lebesgue' space");
    const io::AffineGamma f = *s.gamma_formula;
    if (!(f.slope > 0.0))
      throw ValidationError("agents.gamma.slope: must be > 0 so the infimum is not attained");
    const auto& base = std::get<InflationProfile>(s.market.kind()).base;
    const NonattainmentReport rep =
        nonattainment_experiment(base, GammaProfile{f, f.intercept}, s.space, s.loss, parse_counts(o_.refinements));
    if (!rep.hypothesis_holds)
      err_ << "warning: the inflated value does not move above Gamma; the experiment is vacuous\n";
    std::string out = csv_preamble();
    for (const auto& r : rep.rows)
      out += std::to_string(r.n) + "," + g17(r.value) + "," + g17(r.gap) + "\n";
    emit(out);
    return kOk;
  }

  Options o_;
  std::ostream& err_;
  std::string digest_;
};

/// Entry point shared by the executable and in-process tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"riskshare: risk sharing among a measure space of agents"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--spec", o.spec_path, "market specification (JSON)")->required();
    sub->add_option("--out", o.out_path, "result file (stdout if omitted)");
    sub->add_option("--seed", o.seed, "seed recorded in the result");
    sub->add_option("--tol", o.tol, "Pareto tolerance")->check(CLI::NonNegativeNumber);
  };
  auto* value_cmd = app.add_subcommand("value", "value function, dual optimizer and duality gap");
  auto* alloc_cmd = app.add_subcommand("allocate", "optimal allocation with certificate (profile families)");
  auto* pareto_cmd = app.add_subcommand("pareto", "Pareto check of a given allocation");
  auto* sweep_cmd = app.add_subcommand("sweep", "inflated risk of the base over a gamma grid (CSV)");
  auto* nonatt_cmd = app.add_subcommand("nonattain", "refinement experiment for an unattained ess-inf (CSV)");
  for (auto* sub : {value_cmd, alloc_cmd, pareto_cmd, sweep_cmd, nonatt_cmd}) add_common(sub);
  pareto_cmd->add_option("--alloc", o.alloc_path, "allocation JSON")->required();
  sweep_cmd->add_option("--gamma-grid", o.gamma_grid, "comma list or start:step:stop")->required();
  nonatt_cmd->add_option("--refinements", o.refinements, "comma list of atom counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  o.command = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  int code = kInternal;
  try {
    code = Runner(o, err).run();
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << " (residual " << e.residual() << ")\n";
    return kNonConvergence;
  } catch (const IllPosedError& e) {
    err << "ill-posed market: " << e.what() << "\n";
    return kIllPosed;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << "\n";
    return kUnsupported;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  err << "elapsed_ms=" << ms << "\n";
  return code;
}

}  // namespace riskshare::cli

#endif  // RISKSHARE_CLI_HPP
