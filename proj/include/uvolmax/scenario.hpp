#pragma once

// JSON scenario files. Parse errors and validation errors are reported as
// ConfigError with a "file:line:" prefix pointing at the offending key.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvolmax/constraints.hpp"
#include "uvolmax/errors.hpp"
#include "uvolmax/market.hpp"
#include "uvolmax/pde_grid.hpp"
#include "uvolmax/robust_solver.hpp"
#include "uvolmax/volatility_path.hpp"

namespace uvolmax {

/// Expected numeric outcome recorded in a bundled scenario.
struct Expectation {
  std::string command = "value";
  std::string quantity;  // key of the report field, e.g. "Y0", "value", "gap", "price"
  double value = 0.0;
  double tolerance = 0.0;
  bool relative = false;
};

struct ControlSpec {
  std::size_t n_alpha = 121;
  std::size_t n_delta = 0;   // 0: n_space + 1
  double delta_max = 0.0;    // 0: default_delta_max(market)
};

struct GenEvalSpec {
  double t = 0.0;
  double z_min = -1.0;
  double z_max = 1.0;
  std::size_t n_z = 21;
  std::size_t n_a = 11;
};

struct Scenario {
  std::string name;
  std::string example;  // which worked example this reproduces, free text
  MarketSpec market;
  PdeGridSpec solver;
  PathSearchSpec search;
  ControlSpec controls;
  ClaimMethod method = ClaimMethod::Auto;
  double initial_wealth = 1.0;
  std::optional<LiabilitySpec> claim;     // for indifference pricing
  std::optional<VolatilityPath> path;     // for per-measure evaluation
  GenEvalSpec gen_eval;
  std::vector<Expectation> expect;
};

namespace detail {

using nlohmann::json;

/// 1-based line of byte offset `pos` in `text`.
inline std::size_t line_of(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  ConfigReader(std::string source, std::string text) : source_(std::move(source)), text_(std::move(text)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line_for(key)) + ": " + msg);
  }

  /// Line of the first occurrence of "key" in the file (1 when absent).
  std::size_t line_for(const std::string& key) const {
    if (key.empty()) return 1;
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_of(text_, pos);
  }

  const json& require(const json& obj, const std::string& key) const {
    if (!obj.is_object() || !obj.contains(key)) fail(key, "missing required key \"" + key + "\"");
    return obj.at(key);
  }

  double number(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_number()) fail(key, "\"" + key + "\" must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "\"" + key + "\" must be finite");
    return d;
  }

  double number_or(const json& obj, const std::string& key, double fallback) const {
    return obj.is_object() && obj.contains(key) ? number(obj, key) : fallback;
  }

  std::size_t count_or(const json& obj, const std::string& key, std::size_t fallback) const {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "\"" + key + "\" must be a nonnegative integer");
    return static_cast<std::size_t>(v.get<long long>());
  }

  std::string string(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_string()) fail(key, "\"" + key + "\" must be a string");
    return v.get<std::string>();
  }

  std::string string_or(const json& obj, const std::string& key, const std::string& fallback) const {
    return obj.is_object() && obj.contains(key) ? string(obj, key) : fallback;
  }

  std::vector<double> numbers(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_array()) fail(key, "\"" + key + "\" must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "\"" + key + "\" must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// Runs f, turning library validation errors into line-anchored config errors.
  template <class F>
  auto guarded(const std::string& key, F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }

 private:
  std::string source_;
  std::string text_;
};

inline DriftCurve parse_drift(const ConfigReader& r, const json& j) {
  const std::string type = r.string(j, "type");
  if (type == "constant") return DriftCurve::constant(r.number(j, "b"));
  if (type == "affine") return DriftCurve::affine(r.number(j, "b0"), r.number(j, "slope"));
  if (type == "sampled")
    return r.guarded("drift", [&] { return DriftCurve(SampledDrift{r.numbers(j, "times"), r.numbers(j, "values")}); });
  r.fail("drift", "unknown drift type \"" + type + "\" (constant, affine, sampled)");
}

// Numbers or "inf", "+inf", "-inf".
inline std::optional<double> endpoint(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) return std::nullopt;
  const std::string s = v.get<std::string>();
  if (s == "-inf") return -kInf;
  if (s == "inf" || s == "+inf") return kInf;
  return std::nullopt;
}

inline double bound(const ConfigReader& r, const json& j, const std::string& key, double infinite) {
  if (!j.contains(key) || j.at(key).is_null()) return infinite;
  if (j.at(key).is_string()) {
    if (const auto e = endpoint(j.at(key))) return *e;
    r.fail(key, "\"" + key + "\" must be a number, \"inf\" or \"-inf\"");
  }
  return r.number(j, key);
}

inline ConstraintSet parse_constraint(const ConfigReader& r, const json& j) {
  const std::string type = r.string(j, "type");
  return r.guarded("constraint", [&]() -> ConstraintSet {
    if (type == "full") return ConstraintSet::full();
    if (type == "interval") return ConstraintSet::interval(bound(r, j, "lo", -kInf), bound(r, j, "hi", kInf));
    if (type == "union") {
      std::vector<Interval> pieces;
      const json& arr = r.require(j, "intervals");
      if (!arr.is_array()) r.fail("intervals", "\"intervals\" must be an array of [lo, hi] pairs");
      for (const auto& p : arr) {
        const auto lo = p.is_array() && p.size() == 2 ? endpoint(p[0]) : std::nullopt;
        const auto hi = p.is_array() && p.size() == 2 ? endpoint(p[1]) : std::nullopt;
        if (!lo || !hi) r.fail("intervals", "each interval must be a [lo, hi] pair of numbers or \"inf\" strings");
        pieces.push_back({*lo, *hi});
      }
      return ConstraintSet::union_of(std::move(pieces));
    }
    r.fail("constraint", "unknown constraint type \"" + type + "\" (full, interval, union)");
  });
}

inline UtilitySpec parse_utility(const ConfigReader& r, const json& j) {
  const std::string type = r.string(j, "type");
  if (type == "exponential") {
    const UtilitySpec u = ExponentialUtility{r.number(j, "beta")};
    r.guarded("beta", [&] { validate_utility(u); });
    return u;
  }
  if (type == "power") {
    const UtilitySpec u = PowerUtility{r.number(j, "gamma")};
    r.guarded("gamma", [&] { validate_utility(u); });
    return u;
  }
  if (type == "log") return LogUtility{};
  r.fail("utility", "unknown utility type \"" + type + "\" (exponential, power, log)");
}

inline LiabilitySpec parse_liability(const ConfigReader& r, const json& j, const std::string& anchor) {
  const std::string type = r.string(j, "type");
  if (type == "zero") return ZeroLiability{};
  if (type == "deterministic") return DeterministicLiability{r.number(j, "xi")};
  if (type == "markov")
    return r.guarded(anchor, [&] {
      MarkovPayoff g{r.numbers(j, "knots"), r.numbers(j, "values")};
      g.validate();
      return LiabilitySpec{g};
    });
  if (type == "quadratic") {
    // g(x) = coef x^2, tabulated
    const double coef = r.number(j, "coef");
    return r.guarded(anchor, [&] {
      return LiabilitySpec{MarkovPayoff::tabulate([coef](double x) { return coef * x * x; },
                                                  r.number(j, "half_width"), r.count_or(j, "knots", 4001))};
    });
  }
  if (type == "call_spread") {
    // g(x) = notional * (min(max(x - lower, 0), upper - lower))
    const double lower = r.number(j, "lower"), upper = r.number(j, "upper");
    const double notional = r.number_or(j, "notional", 1.0);
    if (!(lower < upper)) r.fail(anchor, "call spread needs lower < upper");
    return LiabilitySpec{MarkovPayoff{{lower, upper}, {0.0, notional * (upper - lower)}}};
  }
  r.fail(anchor, "unknown liability type \"" + type + "\" (zero, deterministic, markov, quadratic, call_spread)");
}

inline PdeGridSpec parse_solver(const ConfigReader& r, const json& j) {
  PdeGridSpec g;
  g.n_time = r.count_or(j, "n_time", g.n_time);
  g.n_space = r.count_or(j, "n_space", g.n_space);
  g.half_width = r.number_or(j, "L", 0.0);
  const std::string scheme = r.string_or(j, "scheme", "theta");
  if (scheme == "theta")
    g.scheme = SemiImplicitTheta{r.number_or(j, "theta", 0.5)};
  else if (scheme == "monotone")
    g.scheme = MonotoneExplicit{};
  else
    r.fail("scheme", "unknown scheme \"" + scheme + "\" (theta, monotone)");
  r.guarded("solver", [&] { g.validate(); });
  return g;
}

inline PathSearchSpec parse_search(const ConfigReader& r, const json& j) {
  PathSearchSpec s;
  s.intervals = r.count_or(j, "intervals", s.intervals);
  s.max_sweeps = r.count_or(j, "max_sweeps", s.max_sweeps);
  s.rel_tolerance = r.number_or(j, "rel_tolerance", s.rel_tolerance);
  s.coordinate_bits = static_cast<int>(r.count_or(j, "coordinate_bits", static_cast<std::size_t>(s.coordinate_bits)));
  if (j.contains("multi_start")) {
    if (!j.at("multi_start").is_boolean()) r.fail("multi_start", "\"multi_start\" must be true or false");
    s.multi_start = j.at("multi_start").get<bool>();
  }
  r.guarded("search", [&] { s.validate(); });
  return s;
}

}  // namespace detail

/// Parses scenario text; `source` names the file in error messages.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<config>") {
  using nlohmann::json;
  detail::ConfigReader r(source, text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": JSON syntax error: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ":1: top level must be a JSON object");

  Scenario s;
  s.name = r.string_or(j, "name", "");
  s.example = r.string_or(j, "example", "");
  MarketSpec& m = s.market;
  m.horizon = r.number(j, "horizon");
  {
    const json& band = r.require(j, "band");
    const double lo = r.number(band, "a_lo"), hi = r.number(band, "a_hi");
    m.band = r.guarded("band", [&] { return VolatilityBand(lo, hi); });
  }
  m.drift = detail::parse_drift(r, r.require(j, "drift"));
  m.constraint = j.contains("constraint") ? detail::parse_constraint(r, j.at("constraint")) : ConstraintSet::full();
  m.utility = detail::parse_utility(r, r.require(j, "utility"));
  m.liability = j.contains("liability") ? detail::parse_liability(r, j.at("liability"), "liability") : ZeroLiability{};
  r.guarded("horizon", [&] { m.validate(); });

  s.initial_wealth = r.number_or(j, "initial_wealth", 1.0);
  if (!std::holds_alternative<ExponentialUtility>(m.utility) && !(s.initial_wealth > 0.0))
    r.fail("initial_wealth", "initial wealth must be positive for power and log utility");

  s.solver = j.contains("solver") ? detail::parse_solver(r, j.at("solver")) : PdeGridSpec{};
  s.search = j.contains("search") ? detail::parse_search(r, j.at("search")) : PathSearchSpec{};
  if (j.contains("controls")) {
    const json& c = j.at("controls");
    s.controls.n_alpha = r.count_or(c, "n_alpha", s.controls.n_alpha);
    s.controls.n_delta = r.count_or(c, "n_delta", 0);
    s.controls.delta_max = r.number_or(c, "delta_max", 0.0);
    if (s.controls.n_alpha < 2) r.fail("n_alpha", "\"n_alpha\" must be at least 2");
    if (s.controls.delta_max < 0.0) r.fail("delta_max", "\"delta_max\" must be >= 0");
  }
  const std::string method = r.string_or(j, "method", "auto");
  if (method == "auto")
    s.method = ClaimMethod::Auto;
  else if (method == "path_search")
    s.method = ClaimMethod::PathSearch;
  else if (method == "pde")
    s.method = ClaimMethod::RobustPde;
  else
    r.fail("method", "unknown method \"" + method + "\" (auto, path_search, pde)");

  if (j.contains("claim")) {
    s.claim = detail::parse_liability(r, j.at("claim"), "claim");
    MarketSpec with_claim = m;
    with_claim.liability = *s.claim;
    r.guarded("claim", [&] { with_claim.validate(); });
  }
  if (j.contains("path")) {
    const json& p = j.at("path");
    s.path = r.guarded("path", [&] {
      VolatilityPath vp = p.contains("constant") ? VolatilityPath::constant(r.number(p, "constant"), m.horizon)
                                                 : VolatilityPath::uniform(m.horizon, r.numbers(p, "values"));
      vp.validate(m.band, m.horizon);
      return vp;
    });
  }
  if (j.contains("gen_eval")) {
    const json& g = j.at("gen_eval");
    s.gen_eval.t = r.number_or(g, "t", 0.0);
    s.gen_eval.z_min = r.number_or(g, "z_min", -1.0);
    s.gen_eval.z_max = r.number_or(g, "z_max", 1.0);
    s.gen_eval.n_z = r.count_or(g, "n_z", 21);
    s.gen_eval.n_a = r.count_or(g, "n_a", 11);
    if (s.gen_eval.n_z < 1 || s.gen_eval.n_a < 1 || !(s.gen_eval.z_min <= s.gen_eval.z_max))
      r.fail("gen_eval", "gen_eval needs n_z, n_a >= 1 and z_min <= z_max");
  }
  if (j.contains("expect")) {
    const json& arr = j.at("expect");
    if (!arr.is_array()) r.fail("expect", "\"expect\" must be an array");
    for (const auto& e : arr) {
      Expectation x;
      x.command = r.string_or(e, "command", "value");
      x.quantity = r.string(e, "quantity");
      x.value = r.number(e, "value");
      x.tolerance = r.number(e, "tolerance");
      if (e.contains("relative")) {
        if (!e.at("relative").is_boolean()) r.fail("relative", "\"relative\" must be true or false");
        x.relative = e.at("relative").get<bool>();
      }
      s.expect.push_back(x);
    }
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":0: cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace uvolmax
