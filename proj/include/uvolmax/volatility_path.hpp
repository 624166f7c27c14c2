#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "uvolmax/errors.hpp"
#include "uvolmax/market.hpp"

namespace uvolmax {

/// Piecewise-constant deterministic volatility a(t) = values[i] on [grid[i], grid[i+1]).
/// One path is one admissible measure of the uncertainty band.
struct VolatilityPath {
  std::vector<double> grid;
  std::vector<double> values;

  static VolatilityPath constant(double a, double horizon) { return {{0.0, horizon}, {a}}; }

  /// n equal intervals on [0, T].
  static VolatilityPath uniform(double horizon, std::vector<double> values) {
    VolatilityPath p;
    const std::size_t n = values.size();
    p.grid.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) p.grid[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
    p.grid.back() = horizon;
    p.values = std::move(values);
    return p;
  }

  std::size_t size() const { return values.size(); }
  double horizon() const { return grid.back(); }

  /// Index of the piece containing t; the final piece is closed on the right.
  std::size_t piece(double t) const {
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, values.size() - 1);
  }

  double operator()(double t) const { return values[piece(t)]; }

  void validate(const VolatilityBand& band, double horizon) const {
    if (values.empty() || grid.size() != values.size() + 1)
      throw DomainError("volatility path needs n values on an (n+1)-point grid");
    if (grid.front() != 0.0 || std::abs(grid.back() - horizon) > 1e-12 * std::max(1.0, horizon))
      throw DomainError("volatility path grid must cover [0, T]");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i - 1] < grid[i])) throw DomainError("volatility path grid must be strictly ascending");
    for (double a : values)
      if (!band.contains(a)) throw DomainError("volatility path value outside the band");
  }
};

}  // namespace uvolmax
