#pragma once

// Value y0 of the classical BSDE under one deterministic volatility path.
//
// Deterministic liability: Z = 0 and y0 = xi - int_0^T F(s, 0, a(s)) ds.
// Liability g(B_T): y_t = u(t, B_t) with
//     u_t + (1/2) a(t) u_xx = F(t, u_x, a(t)),   u(T, .) = g,
// solved backward by a theta scheme whose nonlinear source is handled by a
// fixed-point loop on the gradient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uvolmax/errors.hpp"
#include "uvolmax/generators.hpp"
#include "uvolmax/market.hpp"
#include "uvolmax/pde_grid.hpp"
#include "uvolmax/pde_kernels.hpp"
#include "uvolmax/volatility_path.hpp"

namespace uvolmax {

namespace detail {

/// Sorted union of breakpoints in [0, T], always containing 0 and T.
inline std::vector<double> merge_breaks(double horizon, std::initializer_list<std::span<const double>> lists) {
  std::vector<double> out{0.0, horizon};
  for (auto l : lists)
    for (double t : l)
      if (t > 0.0 && t < horizon) out.push_back(t);
  std::sort(out.begin(), out.end());
  const double tol = 1e-12 * horizon;
  std::vector<double> uniq;
  for (double t : out)
    if (uniq.empty() || t - uniq.back() > tol) uniq.push_back(t);
  uniq.back() = horizon;
  return uniq;
}

/// Integral of f over [t0, t1]: composite Simpson with step at most max_step.
template <class F>
double simpson(F&& f, double t0, double t1, double max_step) {
  const double len = t1 - t0;
  std::size_t m = static_cast<std::size_t>(std::ceil(len / max_step));
  m = std::max<std::size_t>(2, m + (m % 2));
  const double h = len / static_cast<double>(m);
  double s = f(t0) + f(t1);
  for (std::size_t i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(t0 + h * static_cast<double>(i));
  return s * h / 3.0;
}

}  // namespace detail

/// Quadrature step cap for non-constant integrands.
inline double quadrature_step(double horizon) { return horizon / 400.0; }

/// y0 = xi - int_0^T F(s, 0, a(s)) ds for a deterministic liability (xi = 0 for power/log).
inline double y0_deterministic(const MarketSpec& market, const VolatilityPath& path) {
  if (is_markov(market.liability))
    throw UnsupportedInput("y0_deterministic needs a deterministic liability; use y0_markovian for g(B_T)");
  market.validate();
  path.validate(market.band, market.horizon);
  const double xi = deterministic_value(market.liability);
  const auto drift_breaks = market.drift.breakpoints(market.horizon);
  const auto breaks = detail::merge_breaks(market.horizon, {path.grid, drift_breaks});

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double t0 = breaks[i], t1 = breaks[i + 1];
    const double a = path(0.5 * (t0 + t1));
    auto f = [&](double t) { return FrozenGenerator(market.utility, market.constraint, market.drift(t), a).value(0.0); };
    if (market.drift.is_constant())
      integral += f(t0) * (t1 - t0);
    else
      integral += detail::simpson(f, t0, t1, quadrature_step(market.horizon));
  }
  return xi - integral;
}

// ---------------------------------------------------------------------------

/// Space-time solution of the per-measure PDE in canonical-process coordinates.
/// Slices are stored in ascending time order; the last slice is the terminal payoff.
struct PdeSolution {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> u_x;
  double y0 = 0.0;

  std::size_t time_steps = 0;
  std::size_t fixed_point_iterations = 0;
  std::size_t max_iterations_per_step = 0;
  bool coarse_grid_warning = false;
};

struct SemilinearStats {
  std::size_t steps = 0;
  std::size_t fixed_point_iterations = 0;
  std::size_t max_iterations_per_step = 0;
};

/// Central gradient in the interior, one-sided at the two boundary nodes.
inline void gradient(std::span<const double> u, double dx, std::span<double> out) {
  const std::size_t n = u.size();
  out[0] = (u[1] - u[0]) / dx;
  out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
  for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
}

/// Backward solver for u_t + (1/2) a(t) u_xx = F(t, u_x, a(t)) on a fixed grid.
/// The time grid is uniform with `breakpoints` merged in, so a piecewise-constant
/// path is constant on every step. Instances are immutable; integrate() is const
/// and may be called concurrently.
class SemilinearSolver {
 public:
  static constexpr double kFixedPointTolerance = 1e-10;
  static constexpr int kMaxFixedPointIterations = 50;
  static constexpr std::size_t kRannacherSteps = 2;

  SemilinearSolver(MarketSpec market, PdeGridSpec grid, std::span<const double> breakpoints = {})
      : market_(std::move(market)), grid_(grid) {
    market_.validate();
    grid_.validate();
    if (!std::holds_alternative<ExponentialUtility>(market_.utility))
      throw UnsupportedInput("the per-measure PDE applies to exponential utility; power and log carry xi = 0");
    space_ = SpaceGrid::centered(0.0, grid_.canonical_half_width(market_.band, market_.horizon), grid_.n_space);

    const double T = market_.horizon;
    std::vector<double> uniform(grid_.n_time + 1);
    for (std::size_t i = 0; i <= grid_.n_time; ++i)
      uniform[i] = T * static_cast<double>(i) / static_cast<double>(grid_.n_time);
    const auto drift_breaks = market_.drift.breakpoints(T);
    times_ = detail::merge_breaks(T, {uniform, breakpoints, drift_breaks});
    if (std::holds_alternative<MonotoneExplicit>(grid_.scheme))
      grid_.check_explicit_stability(market_.band, market_.max_abs_drift(), T);
  }

  const MarketSpec& market() const { return market_; }
  const PdeGridSpec& grid() const { return grid_; }
  const SpaceGrid& space() const { return space_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t last_index() const { return times_.size() - 1; }

  /// Index of the time node closest to t.
  std::size_t time_index(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) return last_index();
    std::size_t k = static_cast<std::size_t>(it - times_.begin());
    if (k > 0 && t - times_[k - 1] < times_[k] - t) --k;
    return k;
  }

  std::vector<double> terminal() const {
    std::vector<double> u(space_.n_nodes);
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = terminal_value(market_.liability, space_.x(j));
    return u;
  }

  double origin_value(std::span<const double> u) const { return space_.interpolate(u, 0.0); }

  /// Steps u from time index `from` back to `to` (to < from) under the volatility path.
  /// `observer(n, u)` is called after each step with the new time index.
  void integrate(std::vector<double>& u, std::size_t from, std::size_t to, const VolatilityPath& path,
                 SemilinearStats& stats,
                 const std::function<void(std::size_t, std::span<const double>)>& observer = {}) const {
    Workspace ws(space_.n_nodes);
    for (std::size_t n = from; n > to; --n) {
      const double t_hi = times_[n];
      const double t_lo = times_[n - 1];
      const double a = path(0.5 * (t_lo + t_hi));
      if (std::holds_alternative<MonotoneExplicit>(grid_.scheme)) {
        explicit_step(u, t_lo, t_hi, a);
      } else {
        double theta = std::get<SemiImplicitTheta>(grid_.scheme).theta;
        if (theta < 1.0 && is_markov(market_.liability) && last_index() - n < kRannacherSteps) theta = 1.0;
        theta_step(u, t_lo, t_hi, a, theta, ws, stats);
      }
      ++stats.steps;
      if (observer) observer(n - 1, u);
    }
  }

 private:
  struct Workspace {
    explicit Workspace(std::size_t n)
        : grad(n), rhs(n), w(n), w_new(n), lower(n), diag(n), upper(n), factor_diag(n), factor_mult(n) {}
    std::vector<double> grad, rhs, w, w_new, lower, diag, upper, factor_diag, factor_mult;
  };

  void explicit_step(std::vector<double>& u, double t_lo, double t_hi, double a) const {
    const FrozenGenerator gen(market_.utility, market_.constraint, market_.drift(0.5 * (t_lo + t_hi)), a);
    const double diffusion = 0.5 * a;
    u = step_monotone(u, space_, t_hi, t_hi - t_lo, [&](const NodeStencil& s, double) {
      const double c = -gen.slope(s.u_x_central());
      return diffusion * s.u_xx - gen.value(s.drift_derivative(c, diffusion));
    });
  }

  void theta_step(std::vector<double>& u, double t_lo, double t_hi, double a, double theta, Workspace& ws,
                  SemilinearStats& stats) const {
    const std::size_t n = u.size();
    const double dt = t_hi - t_lo;
    const double dx = space_.dx;
    const double k = 0.5 * a / (dx * dx);
    const FrozenGenerator gen_hi(market_.utility, market_.constraint, market_.drift(t_hi), a);
    const FrozenGenerator gen_lo(market_.utility, market_.constraint, market_.drift(t_lo), a);

    // Explicit part at t_hi.
    gradient(u, dx, ws.grad);
    for (std::size_t j = 0; j < n; ++j) {
      const double uxx = (j == 0 || j == n - 1) ? 0.0 : (u[j + 1] - 2.0 * u[j] + u[j - 1]) * k;
      ws.rhs[j] = u[j] + (1.0 - theta) * dt * (uxx - gen_hi.value(ws.grad[j]));
    }
    if (theta == 0.0) {
      u.swap(ws.rhs);
      check_finite(u, t_lo);
      return;
    }

    // (I - theta dt (a/2) D2) factorization; boundary rows are identity (u_xx = 0 there).
    const double r = theta * dt * k;
    for (std::size_t j = 0; j < n; ++j) {
      const bool edge = (j == 0 || j == n - 1);
      ws.lower[j] = edge ? 0.0 : -r;
      ws.upper[j] = edge ? 0.0 : -r;
      ws.diag[j] = edge ? 1.0 : 1.0 + 2.0 * r;
    }
    ws.factor_diag[0] = ws.diag[0];
    for (std::size_t j = 1; j < n; ++j) {
      ws.factor_mult[j] = ws.lower[j] / ws.factor_diag[j - 1];
      ws.factor_diag[j] = ws.diag[j] - ws.factor_mult[j] * ws.upper[j - 1];
    }
    auto solve = [&](std::vector<double>& b) {
      for (std::size_t j = 1; j < n; ++j) b[j] -= ws.factor_mult[j] * b[j - 1];
      b[n - 1] /= ws.factor_diag[n - 1];
      for (std::size_t j = n - 1; j-- > 0;) b[j] = (b[j] - ws.upper[j] * b[j + 1]) / ws.factor_diag[j];
    };

    ws.w.assign(u.begin(), u.end());
    double damping = 1.0;
    double prev_change = std::numeric_limits<double>::infinity();
    int it = 0;
    for (;; ++it) {
      if (it >= kMaxFixedPointIterations)
        throw SolverFailure("fixed-point loop did not converge within " + std::to_string(kMaxFixedPointIterations) +
                            " iterations at t = " + std::to_string(t_lo) + " (last change " +
                            std::to_string(prev_change) + ")");
      gradient(ws.w, dx, ws.grad);
      for (std::size_t j = 0; j < n; ++j) ws.w_new[j] = ws.rhs[j] - theta * dt * gen_lo.value(ws.grad[j]);
      solve(ws.w_new);
      double change = 0.0, scale = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        change = std::max(change, std::abs(ws.w_new[j] - ws.w[j]));
        scale = std::max(scale, std::abs(ws.w_new[j]));
      }
      if (!std::isfinite(change)) throw SolverFailure("non-finite iterate in fixed-point loop at t = " + std::to_string(t_lo));
      if (change > prev_change && it > 1) damping = std::max(damping * 0.5, 1.0 / 16.0);
      for (std::size_t j = 0; j < n; ++j) ws.w[j] = (1.0 - damping) * ws.w[j] + damping * ws.w_new[j];
      prev_change = change;
      if (change <= kFixedPointTolerance * scale) break;
    }
    stats.fixed_point_iterations += static_cast<std::size_t>(it + 1);
    stats.max_iterations_per_step = std::max(stats.max_iterations_per_step, static_cast<std::size_t>(it + 1));
    u.assign(ws.w.begin(), ws.w.end());
  }

  static void check_finite(std::span<const double> u, double t) {
    for (double v : u)
      if (!std::isfinite(v)) throw SolverFailure("non-finite value at t = " + std::to_string(t));
  }

  MarketSpec market_;
  PdeGridSpec grid_;
  SpaceGrid space_;
  std::vector<double> times_;
};

/// True when a piecewise-linear payoff has distinct kinks closer than two cells.
/// Dense tabulations of smooth payoffs (more kinks than n_space / 4) are not flagged.
inline bool payoff_grid_too_coarse(const LiabilitySpec& liability, double dx, std::size_t n_space) {
  const auto* g = std::get_if<MarkovPayoff>(&liability);
  if (!g) return false;
  std::vector<double> kinks;
  double max_slope = 0.0;
  // g is flat outside its knots, so the end knots can be kinks too
  std::vector<double> slopes{0.0};
  for (std::size_t i = 1; i < g->knots.size(); ++i) {
    slopes.push_back((g->values[i] - g->values[i - 1]) / (g->knots[i] - g->knots[i - 1]));
    max_slope = std::max(max_slope, std::abs(slopes.back()));
  }
  slopes.push_back(0.0);
  for (std::size_t i = 1; i < slopes.size(); ++i)
    if (std::abs(slopes[i] - slopes[i - 1]) > 1e-12 * (1.0 + max_slope)) kinks.push_back(g->knots[i - 1]);
  if (kinks.size() < 2 || kinks.size() > n_space / 4) return false;
  for (std::size_t i = 1; i < kinks.size(); ++i)
    if (kinks[i] - kinks[i - 1] < 2.0 * dx) return true;
  return false;
}

struct RecordOptions {
  /// Number of interior time slices kept besides t = 0 and t = T (0 keeps only those two).
  std::size_t slices = 50;
};

/// Full-field solve of the per-measure PDE; y0 = u(0, 0).
inline PdeSolution y0_markovian(const MarketSpec& market, const VolatilityPath& path, const PdeGridSpec& grid,
                                const RecordOptions& record = {}) {
  if (!std::holds_alternative<ExponentialUtility>(market.utility))
    throw UnsupportedInput("power and log utilities have xi = 0; use y0_deterministic");
  path.validate(market.band, market.horizon);
  const SemilinearSolver solver(market, grid, path.grid);

  PdeSolution sol;
  sol.x = solver.space().nodes();
  const std::size_t last = solver.last_index();
  const std::size_t stride = record.slices == 0 ? last : std::max<std::size_t>(1, last / record.slices);

  std::vector<double> grad(sol.x.size());
  auto keep = [&](std::size_t n, std::span<const double> u) {
    sol.times.push_back(solver.times()[n]);
    sol.u.emplace_back(u.begin(), u.end());
    gradient(u, solver.space().dx, grad);
    sol.u_x.push_back(grad);
  };

  std::vector<double> u = solver.terminal();
  keep(last, u);
  SemilinearStats stats;
  solver.integrate(u, last, 0, path, stats, [&](std::size_t n, std::span<const double> v) {
    if (n == 0 || (last - n) % stride == 0) keep(n, v);
  });

  std::reverse(sol.times.begin(), sol.times.end());
  std::reverse(sol.u.begin(), sol.u.end());
  std::reverse(sol.u_x.begin(), sol.u_x.end());
  sol.y0 = solver.origin_value(sol.u.front());
  sol.time_steps = stats.steps;
  sol.fixed_point_iterations = stats.fixed_point_iterations;
  sol.max_iterations_per_step = stats.max_iterations_per_step;
  sol.coarse_grid_warning = payoff_grid_too_coarse(market.liability, solver.space().dx, grid.n_space);
  return sol;
}

// ---------------------------------------------------------------------------

/// Classical single-measure value with constant volatility a, constant drift b and A = R:
///   exponential  -exp(-beta (x - xi + b^2 T / (2 beta a)))
///   power        exp(-(gamma/(1+gamma)) b^2 T / (2 a)) U(x)
///   log          log x + b^2 T / (2 a)
inline double merton_value_constant_vol(const UtilitySpec& utility, double x, double b, double a, double horizon,
                                        double xi = 0.0) {
  if (!(a > 0.0)) throw DomainError("merton_value_constant_vol requires a > 0");
  return std::visit(
      [&](const auto& u) -> double {
        using U = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<U, ExponentialUtility>) {
          return -std::exp(-u.beta * (x - xi + b * b * horizon / (2.0 * u.beta * a)));
        } else if constexpr (std::is_same_v<U, PowerUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility needs x > 0");
          const double g = u.gamma;
          return std::exp(b * b / (2.0 * a) * (-g / (1.0 + g)) * horizon) * (-std::pow(x, -g) / g);
        } else {
          if (!(x > 0.0)) throw DomainError("log utility needs x > 0");
          return std::log(x) + b * b * horizon / (2.0 * a);
        }
      },
      utility);
}

}  // namespace uvolmax
