#pragma once

// Market data: volatility band, deterministic drift curve, utility, liability.
// All quantities are per unit time; the bond pays zero interest.

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "uvolmax/constraints.hpp"
#include "uvolmax/errors.hpp"

namespace uvolmax {

/// Bounds a_lo <= a <= a_hi on the quadratic-variation density of the canonical process.
struct VolatilityBand {
  double a_lo = 1.0;
  double a_hi = 1.0;

  VolatilityBand() = default;
  VolatilityBand(double lo, double hi) : a_lo(lo), a_hi(hi) {
    if (!(lo > 0.0) || !std::isfinite(hi) || !(lo <= hi))
      throw DomainError("volatility band requires 0 < a_lo <= a_hi < inf");
  }

  bool contains(double a) const { return a_lo <= a && a <= a_hi; }
  double width() const { return a_hi - a_lo; }
};

// ---------------------------------------------------------------------------
// Drift

struct ConstantDrift {
  double b = 0.0;
};

struct AffineDrift {
  double b0 = 0.0;
  double slope = 0.0;
};

/// Linear interpolation between samples, flat outside the sample range.
struct SampledDrift {
  std::vector<double> times;
  std::vector<double> values;
};

class DriftCurve {
 public:
  using Variant = std::variant<ConstantDrift, AffineDrift, SampledDrift>;

  DriftCurve() = default;
  DriftCurve(ConstantDrift c) : curve_(c) {}  // NOLINT(google-explicit-constructor)
  DriftCurve(AffineDrift a) : curve_(a) {}    // NOLINT(google-explicit-constructor)
  DriftCurve(SampledDrift s) : curve_(std::move(s)) {  // NOLINT(google-explicit-constructor)
    const auto& sd = std::get<SampledDrift>(curve_);
    if (sd.times.size() < 2 || sd.times.size() != sd.values.size())
      throw DomainError("sampled drift needs >= 2 (time, value) pairs of equal length");
    for (std::size_t i = 1; i < sd.times.size(); ++i)
      if (!(sd.times[i - 1] < sd.times[i]))
        throw DomainError("sampled drift times must be strictly ascending");
    for (double v : sd.values)
      if (!std::isfinite(v)) throw DomainError("sampled drift values must be finite");
  }

  static DriftCurve constant(double b) { return DriftCurve(ConstantDrift{b}); }
  static DriftCurve affine(double b0, double slope) { return DriftCurve(AffineDrift{b0, slope}); }

  const Variant& variant() const { return curve_; }
  bool is_constant() const { return std::holds_alternative<ConstantDrift>(curve_); }

  double operator()(double t) const {
    return std::visit(
        [t](const auto& c) -> double {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, ConstantDrift>) {
            return c.b;
          } else if constexpr (std::is_same_v<C, AffineDrift>) {
            return c.b0 + c.slope * t;
          } else {
            const auto& ts = c.times;
            if (t <= ts.front()) return c.values.front();
            if (t >= ts.back()) return c.values.back();
            auto it = std::upper_bound(ts.begin(), ts.end(), t);
            const std::size_t k = static_cast<std::size_t>(it - ts.begin());
            const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            return (1.0 - w) * c.values[k - 1] + w * c.values[k];
          }
        },
        curve_);
  }

  /// max |b(t)| over [0, T].
  double max_abs(double horizon) const {
    return std::visit(
        [horizon, this](const auto& c) -> double {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, ConstantDrift>) {
            return std::abs(c.b);
          } else if constexpr (std::is_same_v<C, AffineDrift>) {
            return std::max(std::abs(c.b0), std::abs(c.b0 + c.slope * horizon));
          } else {
            double m = std::max(std::abs((*this)(0.0)), std::abs((*this)(horizon)));
            for (std::size_t i = 0; i < c.times.size(); ++i)
              if (c.times[i] > 0.0 && c.times[i] < horizon) m = std::max(m, std::abs(c.values[i]));
            return m;
          }
        },
        curve_);
  }

  /// Interior kinks of the curve in (0, T); empty for constant and affine drifts.
  std::vector<double> breakpoints(double horizon) const {
    std::vector<double> out;
    if (auto* s = std::get_if<SampledDrift>(&curve_))
      for (double t : s->times)
        if (t > 0.0 && t < horizon) out.push_back(t);
    return out;
  }

  /// Sampled curves must cover the horizon.
  void validate(double horizon) const {
    if (auto* s = std::get_if<SampledDrift>(&curve_)) {
      if (s->times.front() > 0.0 || s->times.back() < horizon)
        throw DomainError("sampled drift grid must cover [0, T]");
    }
  }

 private:
  Variant curve_ = ConstantDrift{};
};

/// Market price of risk b(t) / sqrt(a).
inline double theta(double t, double a, const DriftCurve& drift) {
  if (!(a > 0.0)) throw DomainError("theta requires a > 0");
  return drift(t) / std::sqrt(a);
}

// ---------------------------------------------------------------------------
// Utility

/// U(x) = -exp(-beta x)
struct ExponentialUtility {
  double beta = 1.0;
};
/// U(x) = -x^{-gamma} / gamma
struct PowerUtility {
  double gamma = 1.0;
};
/// U(x) = log x
struct LogUtility {};

using UtilitySpec = std::variant<ExponentialUtility, PowerUtility, LogUtility>;

inline void validate_utility(const UtilitySpec& u) {
  if (auto* e = std::get_if<ExponentialUtility>(&u); e && !(e->beta > 0.0 && std::isfinite(e->beta)))
    throw DomainError("exponential utility requires beta > 0");
  if (auto* p = std::get_if<PowerUtility>(&u); p && !(p->gamma > 0.0 && std::isfinite(p->gamma)))
    throw DomainError("power utility requires gamma > 0");
}

inline double utility_value(const UtilitySpec& u, double x) {
  return std::visit(
      [x](const auto& v) -> double {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, ExponentialUtility>) {
          return -std::exp(-v.beta * x);
        } else if constexpr (std::is_same_v<V, PowerUtility>) {
          return -std::pow(x, -v.gamma) / v.gamma;
        } else {
          return std::log(x);
        }
      },
      u);
}

inline std::string utility_name(const UtilitySpec& u) {
  if (std::holds_alternative<ExponentialUtility>(u)) return "exponential";
  if (std::holds_alternative<PowerUtility>(u)) return "power";
  return "log";
}

// ---------------------------------------------------------------------------
// Liability

struct ZeroLiability {};

struct DeterministicLiability {
  double xi = 0.0;
};

/// xi = g(B_T) with g piecewise linear through (knots, values) and flat outside.
struct MarkovPayoff {
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double x) const {
    if (x <= knots.front()) return values.front();
    if (x >= knots.back()) return values.back();
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - knots.begin());
    const double w = (x - knots[k - 1]) / (knots[k] - knots[k - 1]);
    return (1.0 - w) * values[k - 1] + w * values[k];
  }

  double min_knot_spacing() const {
    double h = kInf;
    for (std::size_t i = 1; i < knots.size(); ++i) h = std::min(h, knots[i] - knots[i - 1]);
    return h;
  }

  void validate() const {
    if (knots.size() < 2 || knots.size() != values.size())
      throw DomainError("Markov payoff needs >= 2 (knot, value) pairs of equal length");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i - 1] < knots[i])) throw DomainError("Markov payoff knots must be strictly ascending");
    for (double v : values)
      if (!std::isfinite(v)) throw DomainError("Markov payoff values must be finite");
  }

  /// Tabulates f on `n` equally spaced knots over [-half_width, half_width].
  template <class F>
  static MarkovPayoff tabulate(F&& f, double half_width, std::size_t n) {
    if (n < 2 || !(half_width > 0.0)) throw DomainError("payoff tabulation needs n >= 2 and half_width > 0");
    MarkovPayoff g;
    g.knots.resize(n);
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(n - 1);
      g.knots[i] = x;
      g.values[i] = f(x);
    }
    return g;
  }
};

using LiabilitySpec = std::variant<ZeroLiability, DeterministicLiability, MarkovPayoff>;

inline bool is_markov(const LiabilitySpec& l) { return std::holds_alternative<MarkovPayoff>(l); }

/// Value of a non-random liability (zero for ZeroLiability).
inline double deterministic_value(const LiabilitySpec& l) {
  if (auto* d = std::get_if<DeterministicLiability>(&l)) return d->xi;
  if (std::holds_alternative<MarkovPayoff>(l)) throw UnsupportedInput("liability is not deterministic");
  return 0.0;
}

/// Terminal condition at canonical-process value x.
inline double terminal_value(const LiabilitySpec& l, double x) {
  if (auto* g = std::get_if<MarkovPayoff>(&l)) return (*g)(x);
  return deterministic_value(l);
}

// ---------------------------------------------------------------------------

struct MarketSpec {
  double horizon = 1.0;
  VolatilityBand band;
  DriftCurve drift;
  ConstraintSet constraint = ConstraintSet::full();
  UtilitySpec utility = ExponentialUtility{};
  LiabilitySpec liability = ZeroLiability{};

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be > 0");
    drift.validate(horizon);
    validate_utility(utility);
    if (auto* d = std::get_if<DeterministicLiability>(&liability); d && !std::isfinite(d->xi))
      throw DomainError("deterministic liability must be finite");
    if (auto* g = std::get_if<MarkovPayoff>(&liability)) g->validate();
    if (!std::holds_alternative<ExponentialUtility>(utility)) {
      const bool zero = std::holds_alternative<ZeroLiability>(liability) ||
                        (std::holds_alternative<DeterministicLiability>(liability) &&
                         std::get<DeterministicLiability>(liability).xi == 0.0);
      if (!zero) throw DomainError("power and log utilities admit only the zero liability");
    }
  }

  double max_abs_drift() const { return drift.max_abs(horizon); }
};

}  // namespace uvolmax
