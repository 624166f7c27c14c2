#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uvolmax/constraints.hpp"
#include "uvolmax/errors.hpp"
#include "uvolmax/market.hpp"

namespace uvolmax {

/// theta = 1 fully implicit, 1/2 Crank-Nicolson, 0 explicit.
struct SemiImplicitTheta {
  double theta = 0.5;
};

/// Explicit step with upwind-or-central first derivatives chosen per node so
/// the update is monotone in the stencil values.
struct MonotoneExplicit {};

using PdeScheme = std::variant<SemiImplicitTheta, MonotoneExplicit>;

inline std::string scheme_name(const PdeScheme& s) {
  if (auto* th = std::get_if<SemiImplicitTheta>(&s)) return "theta(" + std::to_string(th->theta) + ")";
  return "monotone-explicit";
}

/// Uniform grid of n_space cells on [center - L, center + L].
struct SpaceGrid {
  double x0 = 0.0;
  double dx = 1.0;
  std::size_t n_nodes = 0;

  static SpaceGrid centered(double center, double half_width, std::size_t n_cells) {
    return {center - half_width, 2.0 * half_width / static_cast<double>(n_cells), n_cells + 1};
  }

  double x(std::size_t j) const { return x0 + dx * static_cast<double>(j); }

  std::vector<double> nodes() const {
    std::vector<double> out(n_nodes);
    for (std::size_t j = 0; j < n_nodes; ++j) out[j] = x(j);
    return out;
  }

  /// Quadratic interpolation through the three nodes nearest to x (exact for parabolas).
  double interpolate(std::span<const double> u, double x) const {
    const double s = (x - x0) / dx;
    long c = std::lround(s);
    c = std::clamp<long>(c, 1, static_cast<long>(n_nodes) - 2);
    const double r = s - static_cast<double>(c);
    const std::size_t k = static_cast<std::size_t>(c);
    const double um = u[k - 1], u0 = u[k], up = u[k + 1];
    return u0 + 0.5 * r * (up - um) + 0.5 * r * r * (up - 2.0 * u0 + um);
  }
};

struct PdeGridSpec {
  std::size_t n_time = 2000;
  std::size_t n_space = 400;
  double half_width = 0.0;  // 0 selects the solver's default domain
  PdeScheme scheme = SemiImplicitTheta{0.5};

  void validate() const {
    if (n_time < 8 || n_space < 8) throw DomainError("PDE grid needs n_time >= 8 and n_space >= 8");
    if (half_width < 0.0 || !std::isfinite(half_width)) throw DomainError("PDE half width must be >= 0");
    if (auto* th = std::get_if<SemiImplicitTheta>(&scheme); th && !(th->theta >= 0.0 && th->theta <= 1.0))
      throw DomainError("theta must lie in [0, 1]");
  }

  /// Canonical-process domain: L = 6 sqrt(a_hi T) unless set explicitly.
  double canonical_half_width(const VolatilityBand& band, double horizon) const {
    return half_width > 0.0 ? half_width : 6.0 * std::sqrt(band.a_hi * horizon);
  }

  PdeGridSpec scaled(double k) const {
    if (!(k > 0.0)) throw DomainError("grid scale must be > 0");
    PdeGridSpec out = *this;
    out.n_time = static_cast<std::size_t>(std::llround(static_cast<double>(n_time) * k));
    out.n_space = static_cast<std::size_t>(std::llround(static_cast<double>(n_space) * k));
    return out;
  }

  /// Largest explicit step keeping the canonical scheme monotone: dx^2 / (a_hi + max|b| dx).
  static double explicit_step_limit(double dx, double a_hi, double max_abs_drift) {
    return dx * dx / (a_hi + max_abs_drift * dx);
  }

  /// Throws when MonotoneExplicit is selected and T / n_time breaks the stability bound.
  void check_explicit_stability(const VolatilityBand& band, double max_abs_drift, double horizon) const {
    if (!std::holds_alternative<MonotoneExplicit>(scheme)) return;
    const double dx = 2.0 * canonical_half_width(band, horizon) / static_cast<double>(n_space);
    const double dt = horizon / static_cast<double>(n_time);
    const double limit = explicit_step_limit(dx, band.a_hi, max_abs_drift);
    if (dt > limit)
      throw DomainError("explicit time step " + std::to_string(dt) + " exceeds the stability bound " +
                        std::to_string(limit) + "; raise n_time to at least " +
                        std::to_string(static_cast<long long>(std::ceil(horizon / limit))));
  }
};

/// Discrete control sets: volatility values in the band and strategy values in A.
struct ControlGrid {
  std::vector<double> alpha_values;
  std::vector<double> delta_values;

  /// n equally spaced values on [a_lo, a_hi], both endpoints included.
  static std::vector<double> alpha_grid(const VolatilityBand& band, std::size_t n) {
    if (band.a_hi == band.a_lo) return {band.a_lo};
    n = std::max<std::size_t>(n, 2);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = band.a_lo + band.width() * static_cast<double>(i) / static_cast<double>(n - 1);
    out.back() = band.a_hi;
    return out;
  }

  /// Points of A inside [-delta_max, delta_max]: an odd uniform grid, plus the
  /// finite endpoints of A in range, plus 0 when 0 is in A.
  static std::vector<double> delta_grid(const ConstraintSet& set, double delta_max, std::size_t n) {
    std::vector<double> out;
    if (n % 2 == 0) ++n;
    if (delta_max > 0.0 && n >= 3) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = -delta_max + 2.0 * delta_max * static_cast<double>(i) / static_cast<double>(n - 1);
        if (set.contains(d)) out.push_back(d);
      }
    }
    for (const auto& p : set.pieces()) {
      for (double e : {p.lo, p.hi})
        if (std::isfinite(e) && std::abs(e) <= delta_max) out.push_back(e);
    }
    if (set.contains(0.0)) out.push_back(0.0);
    if (out.empty()) {
      // A does not meet the search range: fall back to the points of A nearest to it.
      out.push_back(project(0.0, set));
      out.push_back(project(-delta_max, set));
      out.push_back(project(delta_max, set));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  static ControlGrid alpha_only(const VolatilityBand& band, std::size_t n_alpha) {
    return {alpha_grid(band, n_alpha), {}};
  }

  static ControlGrid make(const VolatilityBand& band, std::size_t n_alpha, const ConstraintSet& set,
                          double delta_max, std::size_t n_delta) {
    return {alpha_grid(band, n_alpha), delta_grid(set, delta_max, n_delta)};
  }

  void validate(const VolatilityBand& band, const ConstraintSet* set) const {
    if (alpha_values.empty()) throw DomainError("control grid has no volatility values");
    if (!std::is_sorted(alpha_values.begin(), alpha_values.end()))
      throw DomainError("volatility controls must be ascending");
    if (alpha_values.front() != band.a_lo || alpha_values.back() != band.a_hi)
      throw DomainError("volatility controls must contain both band endpoints");
    for (double a : alpha_values)
      if (!band.contains(a)) throw DomainError("volatility control outside the band");
    if (set) {
      if (delta_values.empty()) throw DomainError("control grid has no strategy values");
      for (double d : delta_values)
        if (!set->contains(d)) throw DomainError("strategy control outside the constraint set");
    }
  }
};

/// Truncation of the strategy space used when A is unbounded: four times the
/// largest unconstrained Merton fraction b / ((1 + gamma) a_lo).
inline double default_delta_max(const MarketSpec& market) {
  double gamma = 0.0;
  if (auto* p = std::get_if<PowerUtility>(&market.utility)) gamma = p->gamma;
  return 4.0 * market.max_abs_drift() / ((1.0 + gamma) * market.band.a_lo);
}

/// Solves a tridiagonal system in place (Thomas algorithm). `diag` is overwritten.
/// lower[0] and upper[n-1] are ignored.
inline void solve_tridiagonal(std::span<const double> lower, std::span<double> diag, std::span<const double> upper,
                              std::span<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace uvolmax
