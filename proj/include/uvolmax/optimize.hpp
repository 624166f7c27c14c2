#pragma once

// Scalar minimization on a closed interval: coarse scan, golden-section
// refinement of the best bracket, endpoint checks.

#include <algorithm>
#include <cmath>
#include <limits>

namespace uvolmax {

struct ScalarMinimum {
  double argmin = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

struct BandSearchOptions {
  int scan_points = 17;         // including both endpoints
  double rel_tolerance = 1e-10;  // bracket width relative to (hi - lo)
  int max_iterations = 200;
};

/// Golden-section search of f on [lo, hi]; f need only be unimodal there.
template <class F>
ScalarMinimum golden_section(F&& f, double lo, double hi, double abs_tolerance, int max_iterations = 200) {
  constexpr double kInvPhi = 0.6180339887498948482;
  ScalarMinimum out;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  out.evaluations = 2;
  for (int it = 0; it < max_iterations && (hi - lo) > abs_tolerance; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
    ++out.evaluations;
  }
  if (f1 <= f2) {
    out.argmin = x1;
    out.value = f1;
  } else {
    out.argmin = x2;
    out.value = f2;
  }
  return out;
}

/// Minimizes f over [lo, hi]. The endpoints are always candidates and win
/// ties; an interior point replaces them only if it is lower by more than
/// rounding noise, so flat or monotone objectives return an exact endpoint.
template <class F>
ScalarMinimum minimize_on_band(F&& f, double lo, double hi, const BandSearchOptions& opt = {}) {
  ScalarMinimum best{lo, f(lo), 1};
  if (!(hi > lo)) return best;
  const double f_hi = f(hi);
  ++best.evaluations;
  if (f_hi < best.value) best = {hi, f_hi, best.evaluations};

  auto better = [](double candidate, double incumbent) {
    const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(incumbent));
    return candidate < incumbent - noise;
  };

  const int n = std::max(3, opt.scan_points);
  int best_k = -1;
  double scan_best = std::numeric_limits<double>::infinity();
  for (int k = 1; k < n - 1; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    const double v = f(x);
    ++best.evaluations;
    if (v < scan_best) {
      scan_best = v;
      best_k = k;
    }
  }
  if (best_k < 0) return best;

  const double step = (hi - lo) / static_cast<double>(n - 1);
  const double blo = lo + step * static_cast<double>(best_k - 1);
  const double bhi = lo + step * static_cast<double>(best_k + 1);
  ScalarMinimum g = golden_section(f, blo, bhi, opt.rel_tolerance * (hi - lo), opt.max_iterations);
  best.evaluations += g.evaluations;
  if (scan_best < g.value) {
    g.value = scan_best;
    g.argmin = lo + step * static_cast<double>(best_k);
  }
  if (better(g.value, best.value)) {
    best.argmin = g.argmin;
    best.value = g.value;
  }
  return best;
}

}  // namespace uvolmax
