#pragma once

// Finite-difference kernels for backward equations u_t + H(x, u_x, u_xx) = 0.
//
// step_monotone advances one explicit step u(t - dt) = u(t) + dt H. The
// Hamiltonian sees a NodeStencil and picks its own first derivative through
// NodeStencil::drift_derivative, which keeps every linear piece of H monotone.
// Boundary nodes use u_xx = 0 and a zero-slope ghost for the outward
// difference, so the update stays monotone there as well.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "uvolmax/errors.hpp"
#include "uvolmax/market.hpp"
#include "uvolmax/pde_grid.hpp"

namespace uvolmax {

struct NodeStencil {
  std::size_t index = 0;
  double x = 0.0;
  double dx = 1.0;
  double u = 0.0;
  double u_x_backward = 0.0;
  double u_x_forward = 0.0;
  double u_xx = 0.0;
  bool boundary = false;

  double u_x_central() const { return 0.5 * (u_x_backward + u_x_forward); }

  /// Derivative to pair with a drift term c * u_x when the same linear piece
  /// carries diffusion d * u_xx: central when that is monotone (|c| dx <= 2 d),
  /// upwind otherwise. Boundary nodes are always upwinded.
  double drift_derivative(double c, double diffusion) const {
    if (!boundary && std::abs(c) * dx <= 2.0 * diffusion) return u_x_central();
    return c > 0.0 ? u_x_forward : u_x_backward;
  }
};

inline NodeStencil make_stencil(std::span<const double> u, std::size_t j, const SpaceGrid& g) {
  NodeStencil s;
  s.index = j;
  s.x = g.x(j);
  s.dx = g.dx;
  s.u = u[j];
  const std::size_t last = u.size() - 1;
  if (j == 0) {
    s.boundary = true;
    s.u_x_forward = (u[1] - u[0]) / g.dx;
  } else if (j == last) {
    s.boundary = true;
    s.u_x_backward = (u[last] - u[last - 1]) / g.dx;
  } else {
    s.u_x_backward = (u[j] - u[j - 1]) / g.dx;
    s.u_x_forward = (u[j + 1] - u[j]) / g.dx;
    s.u_xx = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (g.dx * g.dx);
  }
  return s;
}

/// One explicit backward step: returns u + dt * H(stencil_j, t) for every node.
/// Throws SolverFailure on a non-finite result.
template <class Hamiltonian>
std::vector<double> step_monotone(std::span<const double> u, const SpaceGrid& grid, double t, double dt,
                                  Hamiltonian&& hamiltonian) {
  std::vector<double> out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    const NodeStencil s = make_stencil(u, j, grid);
    out[j] = u[j] + dt * hamiltonian(s, t);
    if (!std::isfinite(out[j]))
      throw SolverFailure("non-finite value in monotone step at t = " + std::to_string(t) +
                          ", x = " + std::to_string(s.x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Max / sup-inf scans over discrete controls. Ties go to the smallest control.

struct ArgMax {
  double value = -std::numeric_limits<double>::infinity();
  double arg = 0.0;
};

template <class F>
ArgMax max_over(std::span<const double> controls, F&& f) {
  ArgMax best;
  for (double c : controls) {
    const double v = f(c);
    if (v > best.value) best = {v, c};
  }
  return best;
}

struct SupInfResult {
  double value = 0.0;
  double argmax_delta = 0.0;
  double argmin_alpha = 0.0;
};

enum class AlphaSearch {
  BangBang,  // endpoints only; exact when the objective is affine in alpha
  FullScan,
};

/// sup over delta of inf over alpha of f(delta, alpha).
template <class F>
SupInfResult sup_inf_scan(std::span<const double> deltas, std::span<const double> alphas, F&& f,
                          AlphaSearch mode = AlphaSearch::FullScan) {
  SupInfResult best{-std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (double d : deltas) {
    double inner = std::numeric_limits<double>::infinity();
    double arg = alphas.front();
    auto consider = [&](double a) {
      const double v = f(d, a);
      if (v < inner) {
        inner = v;
        arg = a;
      }
    };
    if (mode == AlphaSearch::BangBang) {
      consider(alphas.front());
      consider(alphas.back());
    } else {
      for (double a : alphas) consider(a);
    }
    if (inner > best.value) best = {inner, d, arg};
  }
  return best;
}

/// Robust Merton Hamiltonian in wealth coordinates:
///   sup_{delta in A} inf_{alpha in band} [ x delta b(t) u_x + (1/2) x^2 delta^2 alpha u_xx ].
/// The alpha coefficient (1/2) x^2 delta^2 u_xx is sign-definite for each delta, so
/// BangBang gives the same value as a full scan: a_hi when u_xx < 0, a_lo when u_xx > 0.
inline SupInfResult sup_inf_hamiltonian(double x, double u_x, double u_xx, double t, const MarketSpec& market,
                                        const ControlGrid& controls, AlphaSearch mode = AlphaSearch::BangBang) {
  const double b = market.drift(t);
  return sup_inf_scan(
      controls.delta_values, controls.alpha_values,
      [&](double delta, double alpha) { return x * delta * b * u_x + 0.5 * x * x * delta * delta * alpha * u_xx; },
      mode);
}

/// G(gamma) = (1/2) sup_{a in band} a gamma = (1/2)(a_hi gamma^+ - a_lo gamma^-).
inline double g_function(double gamma, const VolatilityBand& band) {
  return 0.5 * (band.a_hi * std::max(gamma, 0.0) - band.a_lo * std::max(-gamma, 0.0));
}

}  // namespace uvolmax
