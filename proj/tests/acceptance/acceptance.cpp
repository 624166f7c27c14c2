// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uvolmax/cli.hpp"
#include "uvolmax/scenario.hpp"
#include "uvolmax/uvolmax.hpp"

using namespace uvolmax;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

MarketSpec example2_market() {
  MarketSpec m;
  m.band = {0.3, 0.9};
  m.drift = DriftCurve::affine(0.2, 0.8);
  m.utility = ExponentialUtility{0.5};
  m.liability = MarkovPayoff::tabulate([](double x) { return -x * x; }, 12.0, 4001);
  return m;
}

// y0 under a piecewise-constant path for g(x) = -x^2, A = R, b(t) = 0.2 + 0.8 t, beta = 0.5:
//   -int (a + b^2 / (2 beta a)) dt - int 2 b_t (int_0^t b_s ds) dt
double example2_closed_form(const VolatilityPath& p) {
  const double beta = 0.5;
  auto cube = [](double t) { return std::pow(0.2 + 0.8 * t, 3) / (3.0 * 0.8); };
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t0 = p.grid[i], t1 = p.grid[i + 1], a = p.values[i];
    total += a * (t1 - t0) + (cube(t1) - cube(t0)) / (2.0 * beta * a);
  }
  const double drift_integral = 0.2 + 0.4;  // int_0^1 b_s ds
  return -total - drift_integral * drift_integral;
}

// Shared by criteria 2 and 5.
const RobustReport& example2_pathsearch() {
  static const RobustReport r = robust_value_markovian_pathsearch(example2_market(), PdeGridSpec{}, PathSearchSpec{});
  return r;
}

std::mt19937_64& rng() {
  static std::mt19937_64 g(20240611);
  return g;
}

double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

VolatilityBand random_band() {
  double lo = uniform(0.01, 1.0), hi = uniform(0.01, 1.0);
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  double worst = 0.0;
  bool paths_ok = true;
  for (int i = 0; i < 20; ++i) {
    MarketSpec m;
    m.band = random_band();
    m.horizon = uniform(0.1, 2.0);
    const double b = uniform(-1.0, 1.0), beta = uniform(0.1, 5.0), xi = uniform(-1.0, 1.0);
    m.drift = DriftCurve::constant(b);
    m.utility = ExponentialUtility{beta};
    m.liability = DeterministicLiability{xi};
    const auto r = robust_value_deterministic(m);
    const double expect = xi - b * b * m.horizon / (2.0 * beta * m.band.a_hi);
    worst = std::max(worst, std::abs(r.Y0 - expect));
    for (double a : r.worst_path.values) paths_ok = paths_ok && a == m.band.a_hi;
  }
  return {worst <= 1e-12 && paths_ok,
          "20 draws, max |err| " + sci(worst) + (paths_ok ? ", worst path = a_hi" : ", worst path NOT a_hi")};
}

Outcome criterion2() {
  const auto& r = example2_pathsearch();
  const auto& p = r.worst_path;
  const double cell = 1.0 / static_cast<double>(p.size());
  // a*(t) = clip(b_t, 0.3, 0.9) moves by at most 0.8 per unit time
  const double allowed = 2.0 * 0.8 * cell;
  double dist = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = 0.5 * (p.grid[i] + p.grid[i + 1]);
    dist = std::max(dist, std::abs(p.values[i] - std::clamp(0.2 + 0.8 * t, 0.3, 0.9)));
  }
  const double closed = example2_closed_form(p);
  const double rel = std::abs(r.Y0 - closed) / std::abs(closed);
  bool interior = false;
  for (double a : p.values) interior = interior || (a > 0.3 + 1e-3 && a < 0.9 - 1e-3);
  return {p.size() >= 32 && dist <= allowed && rel <= 1e-4 && interior,
          std::to_string(p.size()) + " intervals, L-inf distance " + sci(dist) + " (allowed " + sci(allowed) +
              "), Y0 " + sci(r.Y0) + " vs closed form rel err " + sci(rel) +
              (interior ? ", interior values present" : ", bang-bang only")};
}

Outcome criterion3() {
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    MarketSpec m;
    m.band = random_band();
    m.horizon = uniform(0.1, 2.0);
    const double b = uniform(-1.0, 1.0), gamma = uniform(0.1, 5.0), x = uniform(0.2, 5.0);
    m.drift = DriftCurve::constant(b);
    m.utility = PowerUtility{gamma};
    const double expect =
        -std::pow(x, -gamma) / gamma * std::exp(-gamma * b * b * m.horizon / (2.0 * (1.0 + gamma) * m.band.a_hi));
    worst = std::max(worst, std::abs(robust_value_deterministic(m, x).value - expect) / std::max(1.0, std::abs(expect)));
  }

  MarketSpec ex3;
  ex3.band = {0.04, 0.09};
  ex3.drift = DriftCurve::constant(0.2);
  ex3.utility = PowerUtility{1.0};
  const double exact = -std::exp(-1.0 / 9.0);
  const PdeGridSpec g1{};
  const PdeGridSpec g2 = g1.scaled(2.0);
  const double e1 = std::abs(merton_hjb_wealth_pde(ex3, g1, default_wealth_controls(ex3, g1)).value - exact) / std::abs(exact);
  const double e2 = std::abs(merton_hjb_wealth_pde(ex3, g2, default_wealth_controls(ex3, g2)).value - exact) / std::abs(exact);
  const double factor = e1 / e2;
  return {worst <= 1e-12 && e1 <= 5e-3 && factor >= 1.8,
          "20 draws, max err " + sci(worst) + "; wealth PDE rel err " + sci(e1) + " default, " + sci(e2) +
              " at scale 2 (factor " + sci(factor) + ")"};
}

Outcome criterion4() {
  MarketSpec ex1;
  ex1.band = {0.04, 0.09};
  ex1.drift = DriftCurve::constant(0.2);
  ex1.utility = ExponentialUtility{1.0};
  MarketSpec ex3 = ex1;
  ex3.utility = PowerUtility{1.0};
  const auto alphas = ControlGrid::alpha_grid(ex1.band, 101);
  const double g1 = minmax_gap(ex1, alphas).gap;
  const double g3 = minmax_gap(ex3, alphas, 1.0).gap;

  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    MarketSpec m;
    m.band = random_band();
    m.horizon = uniform(0.1, 2.0);
    m.drift = DriftCurve::constant(uniform(-1.0, 1.0));
    double x = uniform(0.2, 5.0);
    switch (i % 3) {
      case 0:
        m.utility = ExponentialUtility{uniform(0.1, 5.0)};
        m.liability = DeterministicLiability{uniform(-1.0, 1.0)};
        x = uniform(-1.0, 1.0);
        break;
      case 1:
        m.utility = PowerUtility{uniform(0.1, 5.0)};
        break;
      default:
        m.utility = LogUtility{};
    }
    worst = std::max(worst, minmax_gap(m, ControlGrid::alpha_grid(m.band, 101), x).gap);
  }
  return {g1 <= 1e-12 && g3 <= 1e-12 && worst <= 1e-10,
          "example gaps " + sci(g1) + ", " + sci(g3) + "; 10 random scenarios max gap " + sci(worst)};
}

Outcome criterion5() {
  MarketSpec zero;
  zero.band = {0.04, 0.09};
  zero.drift = DriftCurve::constant(0.2);
  zero.utility = ExponentialUtility{1.0};
  double worst_cash = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double c = uniform(-2.0, 2.0);
    MarketSpec claim = zero;
    claim.liability = DeterministicLiability{c};
    worst_cash = std::max(worst_cash, std::abs(indifference_price(claim, zero, 1.0).price - c));
  }

  const MarketSpec with_claim = example2_market();
  MarketSpec base = with_claim;
  base.liability = ZeroLiability{};
  const double y0_zero = robust_value_deterministic(base).Y0;
  const double p_search = example2_pathsearch().Y0 - y0_zero;
  RobustSolveOptions pde_opt;
  pde_opt.method = ClaimMethod::RobustPde;
  const double p_pde = indifference_price(with_claim, base, 0.0, pde_opt).price;
  const double rel = std::abs(p_search - p_pde) / std::abs(p_pde);
  return {worst_cash <= 1e-12 && rel <= 1e-3,
          "20 cash claims max |p - c| " + sci(worst_cash) + "; quadratic claim p = " + sci(p_search) +
              " (path search) vs " + sci(p_pde) + " (PDE), rel diff " + sci(rel)};
}

Outcome criterion6() {
  const std::vector<ConstraintSet> sets{
      ConstraintSet::full(), ConstraintSet::interval(-0.5, 1.5), ConstraintSet::interval(0.0, kInf),
      ConstraintSet::interval(-kInf, 0.3), ConstraintSet::singleton(0.4),
      ConstraintSet::union_of({{-2.0, -1.0}, {0.5, 3.0}}), ConstraintSet::union_of({{-kInf, -1.0}, {1.0, kInf}})};
  const VolatilityBand band{0.04, 0.9};
  const DriftCurve drift = DriftCurve::affine(-0.3, 1.2);
  const double max_b = drift.max_abs(1.0);
  long violations = 0, samples = 0;
  for (const auto& set : sets) {
    for (int i = 0; i < 10000; ++i) {
      const double t = uniform(0.0, 1.0), z = uniform(-5.0, 5.0), a = uniform(band.a_lo, band.a_hi);
      const double beta = uniform(0.1, 5.0), gamma = uniform(0.1, 5.0);
      const double sa = std::sqrt(a);
      const double pi = project(sa * uniform(-8.0, 8.0), scale_set(set, a)) / sa;
      const double opt = strategy_exponential(z, a, t, beta, set, drift);
      violations += excess_drift_exponential(pi, z, a, t, beta, set, drift) < -1e-12;
      violations += std::abs(excess_drift_exponential(opt, z, a, t, beta, set, drift)) > 1e-12;
      const double q = a * z * z;
      const auto ge = growth_bound(ExponentialUtility{beta}, set, band, max_b);
      const auto gp = growth_bound(PowerUtility{gamma}, set, band, max_b);
      const auto gl = growth_bound(LogUtility{}, set, band, max_b);
      violations += std::abs(gen_exponential({t, z, a}, beta, set, drift)) > ge.c0 + ge.c1 * q;
      violations += std::abs(gen_power({t, z, a}, gamma, set, drift)) > gp.c0 + gp.c1 * q;
      violations += std::abs(gen_log(t, a, set, drift)) > gl.c0 + gl.c1 * q;
      ++samples;
    }
  }

  // projection suite, exhaustive over interval grids
  long proj_violations = 0, proj_checks = 0;
  for (int lo = -8; lo <= 8; ++lo)
    for (int hi = lo; hi <= 8; ++hi) {
      const auto set = ConstraintSet::interval(0.25 * lo, 0.25 * hi);
      for (int i = -60; i <= 60; ++i) {
        const double x = 0.05 * i;
        const double p = project(x, set);
        proj_violations += project(p, set) != p;
        for (int k = -60; k <= 60; k += 7) {
          const double y = 0.05 * k;
          proj_violations += std::abs(project(x, set) - project(y, set)) > std::abs(x - y) + 1e-15;
          proj_violations += std::abs(distance(x, set) - distance(y, set)) > std::abs(x - y) + 1e-15;
        }
        for (double a : {0.01, 0.09, 0.5, 1.0, 3.0}) {
          const double lhs = distance(std::sqrt(a) * x, scale_set(set, a));
          proj_violations += std::abs(lhs - std::sqrt(a) * distance(x, set)) > 1e-14;
        }
        ++proj_checks;
      }
    }
  return {violations == 0 && proj_violations == 0,
          std::to_string(samples) + " generator samples over " + std::to_string(sets.size()) + " sets, " +
              std::to_string(violations) + " violations; " + std::to_string(proj_checks) + " projection points, " +
              std::to_string(proj_violations) + " violations"};
}

Outcome criterion7() {
  MarketSpec m;
  m.band = {0.3, 0.9};
  m.drift = DriftCurve::constant(0.0);
  m.utility = ExponentialUtility{0.5};
  m.liability = MarkovPayoff::tabulate([](double x) { return -x * x; }, 12.0, 4001);
  double worst = 0.0;
  for (double a : {m.band.a_lo, 0.5 * (m.band.a_lo + m.band.a_hi), m.band.a_hi}) {
    const double y0 = y0_markovian(m, VolatilityPath::constant(a, 1.0), PdeGridSpec{}).y0;
    worst = std::max(worst, std::abs(y0 + a) / a);
  }

  MarketSpec c = example2_market();
  const auto controls = default_alpha_controls(c.band, 21);
  long violations = 0, compared = 0;
  for (int pair = 0; pair < 100; ++pair) {
    MarkovPayoff g1, g2;
    for (int i = 0; i <= 40; ++i) {
      const double x = -6.0 + 12.0 * i / 40.0;
      const double v = uniform(-3.0, 3.0);
      g1.knots.push_back(x);
      g2.knots.push_back(x);
      g1.values.push_back(v);
      g2.values.push_back(v + (i % 4 == 0 ? 0.0 : uniform(0.0, 1.0)));
    }
    std::vector<std::vector<double>> u1, u2;
    RobustPdeOptions o1, o2;
    o1.observer = [&](std::size_t, std::span<const double> u) { u1.emplace_back(u.begin(), u.end()); };
    o2.observer = [&](std::size_t, std::span<const double> u) { u2.emplace_back(u.begin(), u.end()); };
    c.liability = g1;
    robust_value_pde(c, PdeGridSpec{}, controls, 0.0, o1);
    c.liability = g2;
    robust_value_pde(c, PdeGridSpec{}, controls, 0.0, o2);
    for (std::size_t n = 0; n < u1.size(); ++n)
      for (std::size_t j = 0; j < u1[n].size(); ++j) {
        violations += u1[n][j] > u2[n][j];
        ++compared;
      }
  }
  return {worst <= 1e-3 && violations == 0,
          "-x^2 max rel err " + sci(worst) + "; 100 payoff pairs, " + std::to_string(compared) + " node values, " +
              std::to_string(violations) + " comparison violations"};
}

Outcome criterion8() {
  const fs::path root = fs::temp_directory_path() / "uvolmax_acceptance";
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(UVOLMAX_SCENARIO_DIR))
    if (e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());

  int runs = 0, mismatches = 0, failures = 0;
  std::string first_problem;
  for (const auto& cfg : configs) {
    std::set<std::string> cmds{"value"};
    for (const auto& e : load_scenario(cfg.string()).expect) cmds.insert(e.command);
    for (const auto& cmd : cmds) {
      const fs::path d1 = root / "first" / cmd, d2 = root / "second" / cmd;
      std::ostringstream sink;
      RunOptions opt;
      opt.quiet = true;
      opt.out = &sink;
      opt.err = &sink;
      opt.out_dir = d1.string();
      const int rc1 = run_scenario(cfg.string(), cmd, opt);
      opt.out_dir = d2.string();
      const int rc2 = run_scenario(cfg.string(), cmd, opt);
      ++runs;
      if (rc1 != 0 || rc2 != 0) {
        ++failures;
        if (first_problem.empty()) first_problem = cfg.stem().string() + " " + cmd + " exit " + std::to_string(rc1);
        continue;
      }
      for (const auto& f : fs::directory_iterator(d1)) {
        if (f.path().stem().string().rfind(cfg.stem().string(), 0) != 0) continue;
        auto slurp = [](const fs::path& p) {
          std::ifstream in(p, std::ios::binary);
          std::stringstream ss;
          ss << in.rdbuf();
          return ss.str();
        };
        if (slurp(f.path()) != slurp(d2 / f.path().filename())) {
          ++mismatches;
          if (first_problem.empty()) first_problem = f.path().filename().string() + " differs";
        }
      }
    }
  }
  return {mismatches == 0 && failures == 0 && runs > 0,
          std::to_string(configs.size()) + " scenarios, " + std::to_string(runs) + " command runs twice, " +
              std::to_string(mismatches) + " differing files, " + std::to_string(failures) + " failed runs" +
              (first_problem.empty() ? "" : " (" + first_problem + ")")};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double time_limit;  // seconds; 0 means none
  };
  const std::vector<Criterion> criteria{
      {"exponential degeneracy to a_hi", criterion1, 1.0},
      {"quadratic payoff interior optimizer", criterion2, 120.0},
      {"robust Merton (power utility)", criterion3, 60.0},
      {"min-max property", criterion4, 0.0},
      {"indifference pricing", criterion5, 0.0},
      {"generator and projection properties", criterion6, 0.0},
      {"PDE oracle and comparison", criterion7, 0.0},
      {"determinism", criterion8, 0.0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].time_limit > 0.0 && secs > criteria[i].time_limit) {
      o.pass = false;
      o.detail += "; over the " + sci(criteria[i].time_limit) + " s limit";
    }
    std::printf("criterion %zu: %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
