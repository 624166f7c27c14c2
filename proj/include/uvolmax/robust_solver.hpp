#pragma once

// Robust values Y0 = sup over admissible measures of the per-measure value y0^P,
// assembled into V(x) for each utility:
//   exponential  V(x) = -exp(-beta (x - Y0))
//   power        V(x) = -(1/gamma) x^{-gamma} exp(Y0)
//   log          V(x) = log x - Y0
//
// Four routes:
//   robust_value_deterministic   deterministic liability; Z = 0 so the sup is taken pointwise in t
//   robust_value_markovian_pathsearch   coordinate ascent over piecewise-constant paths
//   robust_value_pde             u_t + sup_a [ (1/2) a u_xx - F(t, u_x, a) ] = 0 in canonical coordinates
//   merton_hjb_wealth_pde        power utility HJB in log-wealth coordinates

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "uvolmax/errors.hpp"
#include "uvolmax/generators.hpp"
#include "uvolmax/market.hpp"
#include "uvolmax/measure_eval.hpp"
#include "uvolmax/optimize.hpp"
#include "uvolmax/parallel.hpp"
#include "uvolmax/pde_grid.hpp"
#include "uvolmax/pde_kernels.hpp"
#include "uvolmax/volatility_path.hpp"

namespace uvolmax {

enum class SolveMode { PointwiseClosedForm, PathSearch, RobustPde, WealthPde };

inline std::string mode_name(SolveMode m) {
  switch (m) {
    case SolveMode::PointwiseClosedForm:
      return "pointwise_closed_form";
    case SolveMode::PathSearch:
      return "path_search";
    case SolveMode::RobustPde:
      return "robust_pde";
    case SolveMode::WealthPde:
      return "wealth_pde";
  }
  return "unknown";
}

struct StrategySample {
  double t = 0.0;
  double x = 0.0;
  double value = 0.0;
};

/// a*(t, x) on the recorded slices of a robust PDE solve.
struct ArgmaxField {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<std::vector<double>> a_star;
};

struct RobustReport {
  SolveMode mode = SolveMode::PointwiseClosedForm;
  std::string utility;
  double Y0 = 0.0;
  double x = 1.0;
  double value = 0.0;
  VolatilityPath worst_path;
  ArgmaxField argmax_field;  // RobustPde only
  std::string strategy_label;  // "pi_star" (cash amount) or "rho_star" (fraction of wealth)
  std::vector<StrategySample> strategy;
  std::vector<std::pair<std::string, double>> diagnostics;
  std::vector<std::string> warnings;
  std::string formula;

  void note(std::string key, double v) { diagnostics.emplace_back(std::move(key), v); }

  double diagnostic(const std::string& key) const {
    for (const auto& [k, v] : diagnostics)
      if (k == key) return v;
    throw std::out_of_range("no diagnostic named " + key);
  }
};

inline std::string strategy_label(const UtilitySpec& u) {
  return std::holds_alternative<ExponentialUtility>(u) ? "pi_star" : "rho_star";
}

/// V(x) from Y0 per utility.
inline double assemble_value(const UtilitySpec& utility, double x, double y0) {
  return std::visit(
      [&](const auto& u) -> double {
        using U = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<U, ExponentialUtility>) {
          return -std::exp(-u.beta * (x - y0));
        } else if constexpr (std::is_same_v<U, PowerUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility needs initial wealth x > 0");
          return -std::pow(x, -u.gamma) / u.gamma * std::exp(y0);
        } else {
          if (!(x > 0.0)) throw DomainError("log utility needs initial wealth x > 0");
          return std::log(x) - y0;
        }
      },
      utility);
}

inline std::string value_formula(const UtilitySpec& u) {
  if (std::holds_alternative<ExponentialUtility>(u)) return "V(x) = -exp(-beta (x - Y0))";
  if (std::holds_alternative<PowerUtility>(u)) return "V(x) = -(1/gamma) x^(-gamma) exp(Y0)";
  return "V(x) = log(x) - Y0";
}

// ---------------------------------------------------------------------------
// Deterministic liability

/// Pointwise worst case min_a F(t, 0, a) and its minimizer. F(t, 0, .) is
/// scanned and refined; both band endpoints are candidates and win ties, so
/// a flat generator (b = 0 with 0 in A) returns a_lo.
inline ScalarMinimum pointwise_worst_case(const MarketSpec& market, double t) {
  const double b = market.drift(t);
  auto f = [&](double a) { return FrozenGenerator(market.utility, market.constraint, b, a).value(0.0); };
  return minimize_on_band(f, market.band.a_lo, market.band.a_hi);
}

inline RobustReport robust_value_deterministic(const MarketSpec& market, double x = 1.0) {
  market.validate();
  if (is_markov(market.liability))
    throw UnsupportedInput("robust_value_deterministic needs a deterministic liability");
  const double T = market.horizon;
  const double xi = deterministic_value(market.liability);

  RobustReport r;
  r.mode = SolveMode::PointwiseClosedForm;
  r.utility = utility_name(market.utility);
  r.x = x;
  r.strategy_label = strategy_label(market.utility);
  r.formula = "Y0 = xi - int_0^T min_a F(t, 0, a) dt; " + value_formula(market.utility);

  double integral = 0.0;
  int evaluations = 0;
  std::vector<double> grid{0.0};
  std::vector<double> values;
  auto record = [&](double t0, double t1) {
    const ScalarMinimum m = pointwise_worst_case(market, 0.5 * (t0 + t1));
    evaluations += m.evaluations;
    grid.push_back(t1);
    values.push_back(m.argmin);
  };

  if (market.drift.is_constant()) {
    const ScalarMinimum m = pointwise_worst_case(market, 0.0);
    integral = m.value * T;
    evaluations = m.evaluations;
    grid.push_back(T);
    values.push_back(m.argmin);
  } else {
    const auto breaks = detail::merge_breaks(T, {market.drift.breakpoints(T)});
    const double h_max = quadrature_step(T);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      auto f = [&](double t) {
        const ScalarMinimum m = pointwise_worst_case(market, t);
        evaluations += m.evaluations;
        return m.value;
      };
      integral += detail::simpson(f, breaks[i], breaks[i + 1], h_max);
      // worst path on the same composite grid (one value per Simpson panel)
      const double len = breaks[i + 1] - breaks[i];
      std::size_t m = static_cast<std::size_t>(std::ceil(len / h_max));
      m = std::max<std::size_t>(2, m + (m % 2));
      const double step = 2.0 * len / static_cast<double>(m);
      for (std::size_t k = 0; k < m / 2; ++k) {
        const double t0 = breaks[i] + step * static_cast<double>(k);
        record(t0, k + 1 == m / 2 ? breaks[i + 1] : t0 + step);
      }
    }
  }

  r.Y0 = xi - integral;
  r.value = assemble_value(market.utility, x, r.Y0);
  r.worst_path = {grid, values};

  // Z = 0: the strategy is the projection at z = 0 under the worst-case a(t).
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = grid[i];
    r.strategy.push_back({t, x, FrozenGenerator(market.utility, market.constraint, market.drift(t), values[i]).strategy(0.0)});
  }
  r.note("integral_min_generator", integral);
  r.note("generator_evaluations", evaluations);
  r.note("path_pieces", static_cast<double>(values.size()));
  return r;
}

// ---------------------------------------------------------------------------
// Path search over piecewise-constant volatility paths

struct PathSearchSpec {
  std::size_t intervals = 32;
  std::size_t max_sweeps = 8;
  double rel_tolerance = 1e-8;  // stop when a sweep improves y0 by less than this (relative)
  int coordinate_bits = 14;     // Brent precision per coordinate, in bits of the band width
  bool multi_start = true;

  void validate() const {
    if (intervals < 1) throw DomainError("path search needs at least one interval");
    if (max_sweeps < 1) throw DomainError("path search needs max_sweeps >= 1");
    if (!(rel_tolerance > 0.0)) throw DomainError("path search tolerance must be > 0");
    if (coordinate_bits < 4 || coordinate_bits > 40) throw DomainError("coordinate_bits must lie in [4, 40]");
  }
};

/// y0 under a piecewise-constant path on a fixed uniform partition, with the
/// solution cached at every partition time. Changing coordinate i re-solves
/// only [0, t_{i+1}] starting from the cached slice.
class PathEvaluator {
 public:
  PathEvaluator(const SemilinearSolver& solver, VolatilityPath path) : solver_(&solver), path_(std::move(path)) {
    const std::size_t n = path_.size();
    index_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) index_[i] = solver.time_index(path_.grid[i]);
    cache_.resize(n + 1);
    cache_[n] = solver.terminal();
    for (std::size_t i = n; i-- > 0;) refresh(i);
  }

  const VolatilityPath& path() const { return path_; }
  double value() const { return solver_->origin_value(cache_[0]); }
  std::size_t evaluations() const { return evaluations_; }
  const SemilinearStats& stats() const { return stats_; }

  /// Steps spent so far, in units of one full backward solve.
  double solve_equivalents() const {
    return static_cast<double>(stats_.steps) / static_cast<double>(solver_->last_index());
  }

  /// y0 if coordinate i were set to a, everything else unchanged.
  double trial(std::size_t i, double a) {
    ++evaluations_;
    std::vector<double> u = cache_[i + 1];
    solver_->integrate(u, index_[i + 1], index_[i], VolatilityPath::constant(a, path_.horizon()), stats_);
    if (i > 0) solver_->integrate(u, index_[i], 0, path_, stats_);
    return solver_->origin_value(u);
  }

  /// Sets coordinate i and refreshes its cached slice. Slices below i become
  /// stale until they are refreshed, which a backward sweep does in order.
  void set(std::size_t i, double a) {
    path_.values[i] = a;
    refresh(i);
  }

  void refresh_all() {
    for (std::size_t i = path_.size(); i-- > 0;) refresh(i);
  }

 private:
  void refresh(std::size_t i) {
    cache_[i] = cache_[i + 1];
    solver_->integrate(cache_[i], index_[i + 1], index_[i], path_, stats_);
  }

  const SemilinearSolver* solver_;
  VolatilityPath path_;
  std::vector<std::size_t> index_;
  std::vector<std::vector<double>> cache_;
  SemilinearStats stats_;
  std::size_t evaluations_ = 0;
};

/// Starting path from the terminal payoff: on each interval, the a maximizing
/// (1/2) a g''(0) - F(t_mid, g'(0), a), with g', g'' by central differences at
/// h = sqrt(a_hi T) / 2.
inline VolatilityPath heuristic_start(const MarketSpec& market, std::size_t intervals) {
  const double h = 0.5 * std::sqrt(market.band.a_hi * market.horizon);
  auto g = [&](double x) { return terminal_value(market.liability, x); };
  const double g1 = (g(h) - g(-h)) / (2.0 * h);
  const double g2 = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
  std::vector<double> values(intervals);
  for (std::size_t i = 0; i < intervals; ++i) {
    const double t = market.horizon * (static_cast<double>(i) + 0.5) / static_cast<double>(intervals);
    const double b = market.drift(t);
    auto neg = [&](double a) { return -(0.5 * a * g2 - FrozenGenerator(market.utility, market.constraint, b, a).value(g1)); };
    values[i] = minimize_on_band(neg, market.band.a_lo, market.band.a_hi).argmin;
  }
  return VolatilityPath::uniform(market.horizon, std::move(values));
}

namespace detail {

/// One backward sweep of coordinate ascent. Returns the new value; never decreases it.
inline double coordinate_sweep(PathEvaluator& ev, const VolatilityBand& band, int bits) {
  double current = ev.value();
  const std::size_t n = ev.path().size();
  const boost::uintmax_t max_iter = 64;
  for (std::size_t i = n; i-- > 0;) {
    double best_a = ev.path().values[i];
    double best_v = current;
    if (band.a_hi > band.a_lo) {
      boost::uintmax_t it = max_iter;
      auto neg = [&](double a) { return -ev.trial(i, a); };
      const auto [a_opt, f_opt] = boost::math::tools::brent_find_minima(neg, band.a_lo, band.a_hi, bits, it);
      std::pair<double, double> candidates[] = {{a_opt, -f_opt}, {band.a_lo, ev.trial(i, band.a_lo)},
                                                {band.a_hi, ev.trial(i, band.a_hi)}};
      for (const auto& [a, v] : candidates)
        if (v > best_v) {
          best_v = v;
          best_a = a;
        }
    }
    ev.set(i, best_a);
    current = best_v;
  }
  // the final slice at t = 0 is exact for the accepted path
  return ev.value();
}

}  // namespace detail

/// Coordinate ascent over paths with `intervals` equal pieces. Every start gets
/// one sweep; the best start then continues until a sweep improves y0 by less
/// than rel_tolerance or max_sweeps is reached.
inline RobustReport robust_value_markovian_pathsearch(const MarketSpec& market, const PdeGridSpec& grid,
                                                      const PathSearchSpec& search = {}, double x = 0.0) {
  market.validate();
  search.validate();
  if (!std::holds_alternative<ExponentialUtility>(market.utility))
    throw UnsupportedInput("path search applies to exponential utility");
  const double T = market.horizon;
  const auto partition = VolatilityPath::uniform(T, std::vector<double>(search.intervals, market.band.a_lo)).grid;
  const SemilinearSolver solver(market, grid, partition);

  struct Start {
    std::string name;
    VolatilityPath path;
  };
  std::vector<Start> starts;
  starts.push_back({"heuristic", heuristic_start(market, search.intervals)});
  if (search.multi_start) {
    starts.push_back({"constant_a_lo", VolatilityPath::uniform(T, std::vector<double>(search.intervals, market.band.a_lo))});
    starts.push_back({"constant_a_hi", VolatilityPath::uniform(T, std::vector<double>(search.intervals, market.band.a_hi))});
  }

  std::vector<std::unique_ptr<PathEvaluator>> evaluators(starts.size());
  std::vector<double> initial(starts.size()), after_first(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) {
    evaluators[k] = std::make_unique<PathEvaluator>(solver, starts[k].path);
    initial[k] = evaluators[k]->value();
    after_first[k] = detail::coordinate_sweep(*evaluators[k], market.band, search.coordinate_bits);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < starts.size(); ++k)
    if (after_first[k] > after_first[best]) best = k;

  PathEvaluator& ev = *evaluators[best];
  double value = after_first[best];
  double last_gain = std::abs(value - initial[best]) / std::max(1.0, std::abs(initial[best]));
  std::size_t sweeps = 1;
  bool converged = last_gain < search.rel_tolerance;
  while (!converged && sweeps < search.max_sweeps) {
    const double next = detail::coordinate_sweep(ev, market.band, search.coordinate_bits);
    ++sweeps;
    last_gain = (next - value) / std::max(1.0, std::abs(value));
    value = next;
    converged = last_gain < search.rel_tolerance;
  }

  RobustReport r;
  r.mode = SolveMode::PathSearch;
  r.utility = utility_name(market.utility);
  r.x = x;
  r.Y0 = value;
  r.value = assemble_value(market.utility, x, r.Y0);
  r.worst_path = ev.path();
  r.strategy_label = strategy_label(market.utility);
  r.formula = "Y0 = max over piecewise-constant paths of u(0, 0); " + value_formula(market.utility);
  if (!converged)
    r.warnings.push_back("path search stopped after " + std::to_string(sweeps) +
                         " sweeps with relative gain " + std::to_string(last_gain));

  // Strategy field from the value gradient under the selected path.
  const PdeSolution sol = y0_markovian(market, r.worst_path, grid, {20});
  for (std::size_t n = 0; n + 1 < sol.times.size(); ++n) {
    const double t = sol.times[n];
    const FrozenGenerator gen(market.utility, market.constraint, market.drift(t), r.worst_path(t));
    for (std::size_t j = 0; j < sol.x.size(); j += 4) r.strategy.push_back({t, sol.x[j], gen.strategy(sol.u_x[n][j])});
  }
  if (sol.coarse_grid_warning) r.warnings.push_back("PDE grid is coarse relative to the payoff kinks");

  double evaluations = 0.0, equivalents = 0.0;
  for (const auto& e : evaluators) {
    evaluations += static_cast<double>(e->evaluations());
    equivalents += e->solve_equivalents();
  }
  r.note("best_start", static_cast<double>(best));
  for (std::size_t k = 0; k < starts.size(); ++k) {
    r.note("start_" + starts[k].name + "_initial", initial[k]);
    r.note("start_" + starts[k].name + "_after_first_sweep", after_first[k]);
  }
  r.note("sweeps", static_cast<double>(sweeps));
  r.note("last_relative_gain", last_gain);
  r.note("converged", converged ? 1.0 : 0.0);
  r.note("coordinate_evaluations", evaluations);
  r.note("full_solve_equivalents", equivalents);
  r.note("max_fixed_point_iterations_per_step", static_cast<double>(ev.stats().max_iterations_per_step));
  return r;
}

// ---------------------------------------------------------------------------
// Robust PDE in canonical coordinates

struct RobustPdeOptions {
  std::size_t slices = 50;  // recorded time slices for the a* and strategy fields
  /// Called after each backward step with the new time index and u on the space grid.
  std::function<void(std::size_t, std::span<const double>)> observer;
};

/// Explicit monotone solve of u_t + sup_a [ (1/2) a u_xx - F(t, u_x, a) ] = 0 over
/// the alpha values of `controls`. n_time is raised to the stability bound when needed.
inline RobustReport robust_value_pde(const MarketSpec& market, PdeGridSpec grid, const ControlGrid& controls,
                                     double x = 0.0, const RobustPdeOptions& opt = {}) {
  market.validate();
  grid.validate();
  controls.validate(market.band, nullptr);
  if (!std::holds_alternative<ExponentialUtility>(market.utility))
    throw UnsupportedInput("the canonical robust PDE applies to exponential utility");

  const double T = market.horizon;
  const SpaceGrid space =
      SpaceGrid::centered(0.0, grid.canonical_half_width(market.band, T), grid.n_space);
  const double limit = PdeGridSpec::explicit_step_limit(space.dx, market.band.a_hi, market.max_abs_drift());
  const std::size_t requested = grid.n_time;
  const auto needed = static_cast<std::size_t>(std::ceil(T / limit * (1.0 + 1e-12)));
  grid.n_time = std::max(grid.n_time, needed);
  grid.scheme = MonotoneExplicit{};

  RobustReport r;
  r.mode = SolveMode::RobustPde;
  r.utility = utility_name(market.utility);
  r.x = x;
  r.strategy_label = strategy_label(market.utility);
  r.formula = "u_t + sup_a [ a u_xx / 2 - F(t, u_x, a) ] = 0, Y0 = u(0, 0); " + value_formula(market.utility);

  const std::size_t N = grid.n_time;
  const double dt = T / static_cast<double>(N);
  const std::size_t stride = std::max<std::size_t>(1, N / std::max<std::size_t>(1, opt.slices));
  const auto& alphas = controls.alpha_values;
  const std::size_t origin = static_cast<std::size_t>(std::lround(-space.x0 / space.dx));

  std::vector<double> u(space.n_nodes);
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = terminal_value(market.liability, space.x(j));

  std::vector<FrozenGenerator> gens;
  auto build_gens = [&](double t) {
    gens.clear();
    for (double a : alphas) gens.emplace_back(market.utility, market.constraint, market.drift(t), a);
  };
  if (market.drift.is_constant()) build_gens(0.0);

  std::vector<double> a_star(space.n_nodes), z_star(space.n_nodes);
  std::vector<double> path_values(N);
  auto record = [&](double t) {
    r.argmax_field.times.push_back(t);
    r.argmax_field.a_star.push_back(a_star);
    for (std::size_t j = 0; j < space.n_nodes; j += 4) {
      const FrozenGenerator gen(market.utility, market.constraint, market.drift(t), a_star[j]);
      r.strategy.push_back({t, space.x(j), gen.strategy(z_star[j])});
    }
  };

  for (std::size_t n = N; n > 0; --n) {
    const double t_hi = T * static_cast<double>(n) / static_cast<double>(N);
    const double t_mid = t_hi - 0.5 * dt;
    if (!market.drift.is_constant()) build_gens(t_mid);
    u = step_monotone(u, space, t_hi, dt, [&](const NodeStencil& s, double) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        const double diffusion = 0.5 * alphas[k];
        const double z = s.drift_derivative(-gens[k].slope(s.u_x_central()), diffusion);
        const double h = diffusion * s.u_xx - gens[k].value(z);
        if (h > best) {
          best = h;
          a_star[s.index] = alphas[k];
          z_star[s.index] = s.u_x_central();
        }
      }
      return best;
    });
    path_values[n - 1] = a_star[origin];
    if (opt.observer) opt.observer(n - 1, u);
    if ((N - n) % stride == 0 || n == 1) record(t_mid);
  }

  std::reverse(r.argmax_field.times.begin(), r.argmax_field.times.end());
  std::reverse(r.argmax_field.a_star.begin(), r.argmax_field.a_star.end());
  r.argmax_field.x = space.nodes();
  std::vector<StrategySample> ordered;
  ordered.reserve(r.strategy.size());
  // samples were appended slice by slice backward in time; restore ascending order
  const std::size_t per_slice = (space.n_nodes + 3) / 4;
  for (std::size_t s = r.strategy.size() / per_slice; s-- > 0;)
    for (std::size_t j = 0; j < per_slice; ++j) ordered.push_back(r.strategy[s * per_slice + j]);
  r.strategy = std::move(ordered);

  std::vector<double> times(N + 1);
  for (std::size_t n = 0; n <= N; ++n) times[n] = T * static_cast<double>(n) / static_cast<double>(N);
  times.back() = T;
  r.worst_path = {times, path_values};

  r.Y0 = space.interpolate(u, 0.0);
  r.value = assemble_value(market.utility, x, r.Y0);
  r.note("n_time", static_cast<double>(N));
  r.note("n_time_requested", static_cast<double>(requested));
  r.note("n_space", static_cast<double>(grid.n_space));
  r.note("n_alpha", static_cast<double>(alphas.size()));
  r.note("dt", dt);
  r.note("dx", space.dx);
  r.note("explicit_step_limit", limit);
  if (N > requested)
    r.warnings.push_back("n_time raised from " + std::to_string(requested) + " to " + std::to_string(N) +
                         " to satisfy the explicit stability bound");
  return r;
}

/// Alpha grid used by default for the canonical robust PDE.
inline ControlGrid default_alpha_controls(const VolatilityBand& band, std::size_t n_alpha = 121) {
  return ControlGrid::alpha_only(band, n_alpha);
}

// ---------------------------------------------------------------------------
// Robust Merton HJB in wealth coordinates (power utility)

struct WealthPdeResult {
  std::vector<double> y;   // log-wealth nodes
  std::vector<double> v0;  // v(0, e^y)
  std::vector<double> delta0, alpha0;
  double x = 1.0;
  double value = 0.0;  // v(0, x)
  std::size_t time_steps = 0;
  std::size_t policy_iterations = 0;
  std::size_t max_policy_iterations_per_step = 0;
  double half_width = 0.0;
};

struct WealthPdeOptions {
  AlphaSearch alpha_mode = AlphaSearch::BangBang;
  /// After the grid scan, fit a parabola through the best delta and its two
  /// neighbours and take its vertex when it lies in A and improves the value.
  bool refine_delta = true;
  int max_policy_iterations = 30;
  double residual_tolerance = 1e-12;  // relative to max |v|
};

/// Strategy and volatility controls for the wealth PDE: alpha on the band,
/// delta on A truncated to [-delta_max, delta_max] with n_space + 1 points.
inline ControlGrid default_wealth_controls(const MarketSpec& market, const PdeGridSpec& grid, std::size_t n_alpha = 2) {
  return ControlGrid::make(market.band, n_alpha, market.constraint, default_delta_max(market), grid.n_space + 1);
}

/// Fully implicit policy iteration for
///   -v_t - sup_delta inf_alpha [ x delta b v_x + (1/2) x^2 delta^2 alpha v_xx ] = 0,  v(T, x) = U(x),
/// written in y = log x, where the operator becomes
///   (delta b - d) v_y + d v_yy  with d = (1/2) delta^2 alpha.
/// Boundary rows use the homogeneity v(t, lambda x) = lambda^{-gamma} v(t, x),
/// i.e. v_y = -gamma v and v_yy = gamma^2 v.
inline WealthPdeResult merton_hjb_wealth_pde(const MarketSpec& market, const PdeGridSpec& grid,
                                             const ControlGrid& controls, double x = 1.0,
                                             const WealthPdeOptions& opt = {}) {
  market.validate();
  grid.validate();
  controls.validate(market.band, &market.constraint);
  const auto* power = std::get_if<PowerUtility>(&market.utility);
  if (!power) throw UnsupportedInput("the wealth HJB solver applies to power utility");
  if (!(x > 0.0)) throw DomainError("initial wealth must be > 0");
  const double gamma = power->gamma;
  const double T = market.horizon;

  double delta_ref = 0.0;
  for (double d : controls.delta_values) delta_ref = std::max(delta_ref, std::abs(d));
  delta_ref = std::min(delta_ref, market.max_abs_drift() / ((1.0 + gamma) * market.band.a_lo));
  const double L = grid.half_width > 0.0 ? grid.half_width
                                         : 6.0 * std::sqrt(market.band.a_hi * T) * std::max(1.0, delta_ref);
  const SpaceGrid space = SpaceGrid::centered(std::log(x), L, grid.n_space);
  const std::size_t n = space.n_nodes;
  const double dy = space.dx;
  const std::size_t N = grid.n_time;
  const double dt = T / static_cast<double>(N);
  const auto& deltas = controls.delta_values;
  const auto& alphas = controls.alpha_values;

  WealthPdeResult res;
  res.x = x;
  res.half_width = L;
  res.y = space.nodes();
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = -std::exp(-gamma * res.y[j]) / gamma;

  // Row coefficients (lower, diag, upper) of the discrete operator for one control.
  struct Row {
    double lo, di, up;
  };
  auto row = [&](double delta, double alpha, double b, bool boundary) -> Row {
    const double d = 0.5 * delta * delta * alpha;
    const double c = delta * b - d;
    if (boundary) return {0.0, -gamma * c + gamma * gamma * d, 0.0};
    Row rw{d / (dy * dy), -2.0 * d / (dy * dy), d / (dy * dy)};
    if (std::abs(c) * dy <= 2.0 * d) {
      rw.lo -= c / (2.0 * dy);
      rw.up += c / (2.0 * dy);
    } else if (c > 0.0) {
      rw.up += c / dy;
      rw.di -= c / dy;
    } else {
      rw.lo -= c / dy;
      rw.di += c / dy;
    }
    return rw;
  };

  std::vector<double> pol_delta(n), pol_alpha(n), new_delta(n), new_alpha(n), hamiltonian(n);
  // Per-node sup-inf of the discrete operator applied to w, with its maximizing controls.
  auto scan = [&](const std::vector<double>& w, double b, std::vector<double>& out_delta,
                  std::vector<double>& out_alpha) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool edge = (j == 0 || j == n - 1);
      const double left = j > 0 ? w[j - 1] : 0.0;
      const double right = j + 1 < n ? w[j + 1] : 0.0;
      auto op = [&](double delta, double alpha) {
        const Row rw = row(delta, alpha, b, edge);
        return rw.lo * left + rw.di * w[j] + rw.up * right;
      };
      SupInfResult s = sup_inf_scan(deltas, alphas, op, opt.alpha_mode);
      if (opt.refine_delta && deltas.size() >= 3) {
        const auto k = static_cast<std::size_t>(std::lower_bound(deltas.begin(), deltas.end(), s.argmax_delta) -
                                                deltas.begin());
        if (k > 0 && k + 1 < deltas.size()) {
          const double d0 = deltas[k - 1], d1 = deltas[k], d2 = deltas[k + 1];
          auto inner = [&](double delta) {
            return sup_inf_scan(std::span<const double>(&delta, 1), alphas, op, opt.alpha_mode);
          };
          const double g0 = inner(d0).value, g1 = s.value, g2 = inner(d2).value;
          const double num = (d1 - d0) * (d1 - d0) * (g1 - g2) - (d1 - d2) * (d1 - d2) * (g1 - g0);
          const double den = (d1 - d0) * (g1 - g2) - (d1 - d2) * (g1 - g0);
          if (den != 0.0) {
            const double dv = d1 - 0.5 * num / den;
            const ConstraintSet& A = market.constraint;
            if (dv > d0 && dv < d2 && A.contains(dv) && A.contains(0.5 * (d0 + dv)) && A.contains(0.5 * (dv + d2))) {
              const SupInfResult cand = inner(dv);
              if (cand.value > s.value) s = cand;
            }
          }
        }
      }
      out_delta[j] = s.argmax_delta;
      out_alpha[j] = s.argmin_alpha;
      hamiltonian[j] = s.value;
    }
  };

  std::vector<double> lower(n), diag(n), upper(n), rhs(n), w(n);
  bool have_policy = false;
  double policy_drift = 0.0;

  for (std::size_t step = N; step > 0; --step) {
    const double t = T * (static_cast<double>(step) - 1.0) / static_cast<double>(N);
    const double b = market.drift(t);
    if (!have_policy || b != policy_drift) scan(v, b, pol_delta, pol_alpha);
    int it = 0;
    for (;; ++it) {
      if (it >= opt.max_policy_iterations)
        throw SolverFailure("policy iteration did not settle within " + std::to_string(opt.max_policy_iterations) +
                            " iterations at t = " + std::to_string(t));
      for (std::size_t j = 0; j < n; ++j) {
        const Row rw = row(pol_delta[j], pol_alpha[j], b, j == 0 || j == n - 1);
        lower[j] = -dt * rw.lo;
        diag[j] = 1.0 - dt * rw.di;
        upper[j] = -dt * rw.up;
        rhs[j] = v[j];
      }
      solve_tridiagonal(lower, diag, upper, rhs);
      for (double val : rhs)
        if (!std::isfinite(val)) throw SolverFailure("non-finite value in wealth HJB at t = " + std::to_string(t));
      w.swap(rhs);
      // w solves the step under the current policy; its residual in the
      // nonlinear equation is dt (sup-inf L w - L^policy w) >= 0.
      scan(w, b, new_delta, new_alpha);
      double residual = 0.0, scale = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        const Row rw = row(pol_delta[j], pol_alpha[j], b, j == 0 || j == n - 1);
        const double lw = rw.lo * (j > 0 ? w[j - 1] : 0.0) + rw.di * w[j] + rw.up * (j + 1 < n ? w[j + 1] : 0.0);
        residual = std::max(residual, dt * std::abs(hamiltonian[j] - lw));
        scale = std::max(scale, std::abs(w[j]));
      }
      pol_delta.swap(new_delta);
      pol_alpha.swap(new_alpha);
      if (residual <= opt.residual_tolerance * scale) break;
    }
    res.policy_iterations += static_cast<std::size_t>(it + 1);
    res.max_policy_iterations_per_step =
        std::max(res.max_policy_iterations_per_step, static_cast<std::size_t>(it + 1));
    v = w;
    have_policy = true;
    policy_drift = b;
  }
  res.time_steps = N;
  res.v0 = v;
  res.delta0 = pol_delta;
  res.alpha0 = pol_alpha;
  res.value = space.interpolate(v, std::log(x));
  return res;
}

// ---------------------------------------------------------------------------
// Indifference price and min-max gap

enum class ClaimMethod { Auto, PathSearch, RobustPde };

struct RobustSolveOptions {
  PdeGridSpec grid;
  PathSearchSpec search;
  ClaimMethod method = ClaimMethod::Auto;
  std::size_t n_alpha = 121;
};

/// Y0 for any exponential-utility market: pointwise for deterministic liabilities,
/// path search (Auto) or robust PDE for g(B_T).
inline RobustReport robust_value(const MarketSpec& market, double x, const RobustSolveOptions& opt) {
  if (!is_markov(market.liability)) return robust_value_deterministic(market, x);
  if (opt.method == ClaimMethod::RobustPde)
    return robust_value_pde(market, opt.grid, default_alpha_controls(market.band, opt.n_alpha), x);
  return robust_value_markovian_pathsearch(market, opt.grid, opt.search, x);
}

struct IndifferenceResult {
  double price = 0.0;
  double y0_claim = 0.0;
  double y0_zero = 0.0;
  SolveMode mode_claim = SolveMode::PointwiseClosedForm;
  SolveMode mode_zero = SolveMode::PointwiseClosedForm;
  double residual = 0.0;  // V^0(x) - V^Phi(x + p)
};

/// p solving V^0(x) = V^Phi(x + p); under exponential utility p = Y0^Phi - Y0^0.
inline IndifferenceResult indifference_price(const MarketSpec& with_claim, const MarketSpec& zero, double x,
                                             const RobustSolveOptions& opt = {}) {
  if (!std::holds_alternative<ExponentialUtility>(with_claim.utility) ||
      !std::holds_alternative<ExponentialUtility>(zero.utility))
    throw UnsupportedInput("indifference pricing is implemented for exponential utility");
  const RobustReport claim = robust_value(with_claim, x, opt);
  const RobustReport base = robust_value(zero, x, opt);
  IndifferenceResult out;
  out.y0_claim = claim.Y0;
  out.y0_zero = base.Y0;
  out.price = claim.Y0 - base.Y0;
  out.mode_claim = claim.mode;
  out.mode_zero = base.mode;
  out.residual = assemble_value(zero.utility, x, base.Y0) - assemble_value(with_claim.utility, x + out.price, claim.Y0);
  return out;
}

struct MinMaxResult {
  double gap = 0.0;
  double robust_value = 0.0;  // sup_pi inf_P
  double inner_min = 0.0;     // inf_P sup_pi over the alpha grid
  double argmin_alpha = 0.0;
};

/// |sup_pi inf_P - inf_P sup_pi| with the right side taken as the minimum over
/// `alphas` of the classical constant-volatility value.
inline MinMaxResult minmax_gap(const MarketSpec& market, std::span<const double> alphas, double x = 1.0) {
  market.validate();
  if (!market.constraint.is_full()) throw UnsupportedInput("min-max check needs an unconstrained strategy set");
  if (!market.drift.is_constant()) throw UnsupportedInput("min-max check needs a constant drift");
  if (is_markov(market.liability)) throw UnsupportedInput("min-max check needs a deterministic liability");
  if (alphas.empty()) throw DomainError("min-max check needs at least one volatility value");
  const double b = market.drift(0.0);
  const double xi = deterministic_value(market.liability);

  MinMaxResult out;
  out.robust_value = robust_value_deterministic(market, x).value;
  out.inner_min = std::numeric_limits<double>::infinity();
  for (double a : alphas) {
    if (!market.band.contains(a)) throw DomainError("min-max alpha outside the band");
    const double v = merton_value_constant_vol(market.utility, x, b, a, market.horizon, xi);
    if (v < out.inner_min) {
      out.inner_min = v;
      out.argmin_alpha = a;
    }
  }
  out.gap = std::abs(out.robust_value - out.inner_min);
  return out;
}

}  // namespace uvolmax
