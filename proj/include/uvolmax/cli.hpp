#pragma once

// Scenario driver behind the uvolmax command-line tool.
//
// run_scenario(config, command) writes <stem>.report.json plus the CSV table of
// the command next to the config (or into out_dir) and returns the exit code:
// 0 success, 2 solver failure, 3 configuration or input error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvolmax/errors.hpp"
#include "uvolmax/measure_eval.hpp"
#include "uvolmax/robust_solver.hpp"
#include "uvolmax/scenario.hpp"

namespace uvolmax {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"value",       "worst-vol",   "strategy",    "indiff",
                                              "minmax-check", "convergence", "per-measure", "gen-eval"};
  return names;
}

struct RunOptions {
  std::string out_dir;  // empty: next to the config
  double grid_scale = 1.0;
  bool quiet = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

namespace detail {

using ojson = nlohmann::ordered_json;

/// %.17g: enough digits to round-trip every double.
inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      out_ << (first ? "" : ",") << fmt17(v);
      first = false;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline ojson path_json(const VolatilityPath& p) { return ojson{{"grid", p.grid}, {"values", p.values}}; }

inline ojson grid_json(const PdeGridSpec& g, double scale) {
  return ojson{{"n_time", g.n_time},
               {"n_space", g.n_space},
               {"half_width", g.half_width},
               {"scheme", scheme_name(g.scheme)},
               {"grid_scale", scale}};
}

inline void put_report(ojson& j, const RobustReport& r, bool with_fields) {
  j["utility"] = r.utility;
  j["mode"] = mode_name(r.mode);
  j["formula"] = r.formula;
  j["initial_wealth"] = r.x;
  j["Y0"] = r.Y0;
  j["value"] = r.value;
  j["worst_path"] = path_json(r.worst_path);
  j["strategy_label"] = r.strategy_label;
  ojson diag = ojson::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = v;
  j["diagnostics"] = diag;
  j["warnings"] = r.warnings;
  if (!with_fields) return;
  ojson strat = ojson::array();
  for (const auto& s : r.strategy) strat.push_back({s.t, s.x, s.value});
  j["strategy_field"] = {{"columns", {"t", "x", r.strategy_label}}, {"rows", strat}};
  if (!r.argmax_field.times.empty()) {
    ojson rows = ojson::array();
    for (std::size_t n = 0; n < r.argmax_field.times.size(); ++n)
      for (std::size_t i = 0; i < r.argmax_field.x.size(); i += 4)
        rows.push_back({r.argmax_field.times[n], r.argmax_field.x[i], r.argmax_field.a_star[n][i]});
    j["argmax_field"] = {{"columns", {"t", "x", "a_star"}}, {"rows", rows}};
  }
}

inline RobustSolveOptions solve_options(const Scenario& s, const PdeGridSpec& grid) {
  RobustSolveOptions o;
  o.grid = grid;
  o.search = s.search;
  o.method = s.method;
  o.n_alpha = s.controls.n_alpha;
  return o;
}

inline ControlGrid wealth_controls(const Scenario& s, const PdeGridSpec& grid) {
  const double dmax = s.controls.delta_max > 0.0 ? s.controls.delta_max : default_delta_max(s.market);
  const std::size_t nd = s.controls.n_delta > 0 ? s.controls.n_delta : grid.n_space + 1;
  return ControlGrid::make(s.market.band, 2, s.market.constraint, dmax, nd);
}

/// Relative disagreement between two estimates of the same quantity.
inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

/// Main robust solve for value / worst-vol / strategy, with cross-checks in the report.
inline RobustReport robust_solve(const Scenario& s, const PdeGridSpec& grid, ojson& j, bool cross_check) {
  const MarketSpec& m = s.market;
  const double x = s.initial_wealth;
  RobustReport r = robust_value(m, x, solve_options(s, grid));
  if (!cross_check) return r;
  if (r.mode == SolveMode::PathSearch) {
    const RobustReport pde = robust_value_pde(m, grid, default_alpha_controls(m.band, s.controls.n_alpha), x);
    j["cross_check"] = {{"method", "robust_pde"}, {"Y0", pde.Y0}, {"relative_difference", rel_diff(r.Y0, pde.Y0)}};
    const double tol = 1e-3 * std::max(1.0, std::abs(pde.Y0));
    if (r.Y0 > pde.Y0 + tol) r.warnings.push_back("path-search value exceeds the robust PDE value beyond tolerance");
    if (std::abs(r.Y0 - pde.Y0) > tol) r.warnings.push_back("path-search and robust PDE values disagree beyond 1e-3");
  } else if (std::holds_alternative<PowerUtility>(m.utility)) {
    const WealthPdeResult w = merton_hjb_wealth_pde(m, grid, wealth_controls(s, grid), x);
    j["cross_check"] = {{"method", "wealth_pde"},
                        {"value", w.value},
                        {"relative_difference", rel_diff(r.value, w.value)},
                        {"policy_iterations", w.policy_iterations}};
  }
  return r;
}

inline double lookup(const ojson& j, const std::string& key) {
  const ojson* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("expectation refers to missing field " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!node->is_number()) throw ConfigError("expectation field " + key + " is not a number");
  return node->get<double>();
}

inline void check_expectations(const Scenario& s, const std::string& command, ojson& j) {
  ojson checks = ojson::array();
  for (const auto& e : s.expect) {
    if (e.command != command) continue;
    const double actual = lookup(j, e.quantity);
    const double err = e.relative ? std::abs(actual - e.value) / std::abs(e.value) : std::abs(actual - e.value);
    checks.push_back({{"quantity", e.quantity},
                      {"expected", e.value},
                      {"actual", actual},
                      {"error", err},
                      {"tolerance", e.tolerance},
                      {"relative", e.relative},
                      {"pass", err <= e.tolerance}});
  }
  if (!checks.empty()) j["checks"] = checks;
}

}  // namespace detail

/// Runs one command on a parsed scenario and fills the report. `stem` prefixes output files.
inline void execute(const Scenario& s, const std::string& command, const std::filesystem::path& dir,
                    const std::string& stem, double grid_scale, nlohmann::ordered_json& j) {
  using namespace detail;
  const MarketSpec& m = s.market;
  const PdeGridSpec grid = s.solver.scaled(grid_scale);
  const double x = s.initial_wealth;
  j["grid"] = grid_json(grid, grid_scale);
  auto file = [&](const std::string& suffix) { return dir / (stem + suffix); };

  if (command == "value" || command == "worst-vol" || command == "strategy") {
    const RobustReport r = robust_solve(s, grid, j, command == "value");
    put_report(j, r, command == "value");
    if (command == "worst-vol") {
      CsvWriter csv(file(".worst_vol.csv"), {"t", "a_star"});
      for (std::size_t i = 0; i < r.worst_path.size(); ++i) csv.row({r.worst_path.grid[i], r.worst_path.values[i]});
      csv.row({r.worst_path.grid.back(), r.worst_path.values.back()});
      j["csv"] = stem + ".worst_vol.csv";
    } else if (command == "strategy") {
      CsvWriter csv(file(".strategy.csv"), {"t", "x", r.strategy_label});
      for (const auto& p : r.strategy) csv.row({p.t, p.x, p.value});
      j["csv"] = stem + ".strategy.csv";
    }
  } else if (command == "indiff") {
    if (!s.claim) throw ConfigError("indiff needs a \"claim\" entry in the scenario");
    MarketSpec with_claim = m, zero = m;
    with_claim.liability = *s.claim;
    zero.liability = ZeroLiability{};
    const IndifferenceResult p = indifference_price(with_claim, zero, x, solve_options(s, grid));
    j["price"] = p.price;
    j["Y0_claim"] = p.y0_claim;
    j["Y0_zero"] = p.y0_zero;
    j["mode_claim"] = mode_name(p.mode_claim);
    j["mode_zero"] = mode_name(p.mode_zero);
    j["indifference_residual"] = p.residual;
    j["formula"] = "p = Y0(claim) - Y0(zero), from V0(x) = V(claim)(x + p)";
    if (is_markov(*s.claim) && s.method == ClaimMethod::Auto) {
      RobustSolveOptions alt = solve_options(s, grid);
      alt.method = ClaimMethod::RobustPde;
      const IndifferenceResult q = indifference_price(with_claim, zero, x, alt);
      j["cross_check"] = {{"method", "robust_pde"},
                          {"price", q.price},
                          {"Y0_claim", q.y0_claim},
                          {"relative_difference", rel_diff(p.price, q.price)}};
    }
  } else if (command == "minmax-check") {
    const auto alphas = ControlGrid::alpha_grid(m.band, s.controls.n_alpha);
    const MinMaxResult g = minmax_gap(m, alphas, x);
    j["gap"] = g.gap;
    j["sup_inf_value"] = g.robust_value;
    j["inf_sup_value"] = g.inner_min;
    j["argmin_alpha"] = g.argmin_alpha;
    j["n_alpha"] = alphas.size();
    j["formula"] = "gap = |sup_pi inf_P - min over alpha grid of the constant-volatility value|";
  } else if (command == "convergence") {
    const double scales[] = {0.5, 1.0, 2.0};
    std::vector<double> values;
    std::vector<PdeGridSpec> grids;
    for (double k : scales) {
      const PdeGridSpec g = s.solver.scaled(grid_scale * k);
      grids.push_back(g);
      if (std::holds_alternative<PowerUtility>(m.utility)) {
        values.push_back(merton_hjb_wealth_pde(m, g, wealth_controls(s, g), x).value);
      } else if (std::holds_alternative<ExponentialUtility>(m.utility)) {
        values.push_back(robust_value_pde(m, g, default_alpha_controls(m.band, s.controls.n_alpha), x).Y0);
      } else {
        throw UnsupportedInput("convergence study needs exponential or power utility");
      }
    }
    double reference = values.back();
    std::string ref_name = "finest grid";
    if (!is_markov(m.liability)) {
      const RobustReport exact = robust_value_deterministic(m, x);
      reference = std::holds_alternative<PowerUtility>(m.utility) ? exact.value : exact.Y0;
      ref_name = "pointwise closed form";
    }
    CsvWriter csv(file(".convergence.csv"), {"scale", "n_time", "n_space", "value", "abs_error", "error_ratio"});
    ojson rows = ojson::array();
    double prev = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double err = std::abs(values[i] - reference);
      const double ratio = i == 0 || err == 0.0 ? 0.0 : prev / err;
      csv.row({grid_scale * scales[i], static_cast<double>(grids[i].n_time), static_cast<double>(grids[i].n_space),
               values[i], err, ratio});
      rows.push_back({{"scale", grid_scale * scales[i]}, {"value", values[i]}, {"abs_error", err}, {"error_ratio", ratio}});
      prev = err;
    }
    j["reference"] = reference;
    j["reference_kind"] = ref_name;
    j["quantity"] = std::holds_alternative<PowerUtility>(m.utility) ? "V(x) from the wealth HJB" : "Y0 from the robust PDE";
    j["table"] = rows;
    j["csv"] = stem + ".convergence.csv";
  } else if (command == "per-measure") {
    if (!s.path) throw ConfigError("per-measure needs a \"path\" entry in the scenario");
    j["path"] = path_json(*s.path);
    if (is_markov(m.liability)) {
      const PdeSolution sol = y0_markovian(m, *s.path, grid);
      j["y0"] = sol.y0;
      j["time_steps"] = sol.time_steps;
      j["fixed_point_iterations"] = sol.fixed_point_iterations;
      j["max_iterations_per_step"] = sol.max_iterations_per_step;
      j["coarse_grid_warning"] = sol.coarse_grid_warning;
      CsvWriter csv(file(".per_measure.csv"), {"t", "x", "u", "u_x"});
      for (std::size_t n = 0; n < sol.times.size(); ++n)
        for (std::size_t i = 0; i < sol.x.size(); ++i) csv.row({sol.times[n], sol.x[i], sol.u[n][i], sol.u_x[n][i]});
      j["csv"] = stem + ".per_measure.csv";
    } else {
      j["y0"] = y0_deterministic(m, *s.path);
    }
    j["value"] = assemble_value(m.utility, x, j["y0"].get<double>());
  } else if (command == "gen-eval") {
    const GenEvalSpec& g = s.gen_eval;
    const auto alphas = ControlGrid::alpha_grid(m.band, g.n_a);
    CsvWriter csv(file(".gen_eval.csv"), {"t", "z", "a", "F", strategy_label(m.utility)});
    for (double a : alphas) {
      const FrozenGenerator gen(m.utility, m.constraint, m.drift, g.t, a);
      for (std::size_t i = 0; i < g.n_z; ++i) {
        const double z = g.n_z == 1 ? g.z_min
                                    : g.z_min + (g.z_max - g.z_min) * static_cast<double>(i) / static_cast<double>(g.n_z - 1);
        csv.row({g.t, z, a, gen.value(z), gen.strategy(z)});
      }
    }
    j["rows"] = alphas.size() * g.n_z;
    j["csv"] = stem + ".gen_eval.csv";
  } else {
    throw ConfigError("unknown command \"" + command + "\"");
  }
  check_expectations(s, command, j);
}

/// Parses the config, runs the command, writes the report. Returns the exit code.
inline int run_scenario(const std::string& config_path, const std::string& command, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  using detail::ojson;
  const fs::path cfg(config_path);
  const fs::path dir = opt.out_dir.empty() ? (cfg.has_parent_path() ? cfg.parent_path() : fs::path(".")) : fs::path(opt.out_dir);
  const std::string stem = cfg.stem().string();

  ojson j;
  j["scenario"] = stem;
  j["command"] = command;
  auto write_report = [&] {
    std::ofstream out(dir / (stem + ".report.json"));
    out << j.dump(2) << '\n';
  };

  Scenario s;
  try {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
      throw ConfigError("unknown command \"" + command + "\"");
    if (!(opt.grid_scale > 0.0) || !std::isfinite(opt.grid_scale)) throw ConfigError("--grid-scale must be > 0");
    s = load_scenario(config_path);
    if (!s.name.empty()) j["scenario"] = s.name;
    if (!s.example.empty()) j["example"] = s.example;
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    *opt.err << "error: " << e.what() << '\n';
    return 3;
  }

  try {
    j["status"] = "ok";
    execute(s, command, dir, stem, opt.grid_scale, j);
  } catch (const SolverFailure& e) {
    j["status"] = "solver_failure";
    j["error"] = e.what();
    write_report();
    *opt.err << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    *opt.err << "error: " << e.what() << '\n';
    return 3;
  }
  write_report();

  if (!opt.quiet) {
    auto& out = *opt.out;
    out << stem << " [" << command << "]";
    for (const char* key : {"Y0", "value", "price", "gap", "y0"})
      if (j.contains(key) && j[key].is_number()) out << "  " << key << " = " << detail::fmt17(j[key].get<double>());
    out << '\n';
    if (j.contains("warnings"))
      for (const auto& w : j["warnings"]) out << "  warning: " << w.get<std::string>() << '\n';
    if (j.contains("checks"))
      for (const auto& c : j["checks"])
        out << "  check " << c["quantity"].get<std::string>() << ": " << (c["pass"].get<bool>() ? "pass" : "FAIL")
            << " (error " << detail::fmt17(c["error"].get<double>()) << ")\n";
    out << "  report: " << (dir / (stem + ".report.json")).string() << '\n';
  }
  return 0;
}

}  // namespace uvolmax
