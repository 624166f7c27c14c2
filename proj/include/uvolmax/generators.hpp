#pragma once

// Quadratic generators F(t, z, a) of the robust utility problems and the
// projection formulas for the matching optimal strategies.
//
// Exponential, U(x) = -exp(-beta x), strategy pi is a cash amount:
//   F = -(beta/2) dist^2(sqrt(a) z + theta/beta, A_a) + z sqrt(a) theta + theta^2 / (2 beta)
//   sqrt(a) pi* = Proj_{A_a}(sqrt(a) z + theta/beta)
// Power, U(x) = -x^{-gamma}/gamma, strategy rho is a wealth fraction:
//   F = -(gamma(1+gamma)/2) dist^2(w/(1+gamma), A_a) + gamma w^2/(2(1+gamma)) + a z^2 / 2,
//   w = -sqrt(a) z + theta,  sqrt(a) rho* = Proj_{A_a}(w/(1+gamma))
// Log, U(x) = log x:
//   F = -(1/2) dist^2(theta, A_a) + theta^2 / 2,  sqrt(a) rho* = Proj_{A_a}(theta)
//
// with theta = b(t)/sqrt(a) and A_a = sqrt(a) A.

#include <algorithm>
#include <cmath>
#include <variant>

#include "uvolmax/constraints.hpp"
#include "uvolmax/market.hpp"

namespace uvolmax {

struct GeneratorInput {
  double t = 0.0;
  double z = 0.0;
  double a = 1.0;
};

/// Generator with (t, a) frozen: theta, sqrt(a) and A_a are computed once.
/// This is the single evaluation path used by the free functions and the PDE solvers.
class FrozenGenerator {
 public:
  FrozenGenerator(const UtilitySpec& utility, const ConstraintSet& set, double drift_value, double a)
      : sqrt_a_(std::sqrt(a)),
        theta_(drift_value / sqrt_a_),
        scaled_(scale_set(set, a)),
        full_(set.is_full()) {
    std::visit(
        [this](const auto& u) {
          using U = std::decay_t<decltype(u)>;
          if constexpr (std::is_same_v<U, ExponentialUtility>) {
            kind_ = Kind::Exponential;
            param_ = u.beta;
          } else if constexpr (std::is_same_v<U, PowerUtility>) {
            kind_ = Kind::Power;
            param_ = u.gamma;
          } else {
            kind_ = Kind::Log;
          }
        },
        utility);
  }

  FrozenGenerator(const UtilitySpec& utility, const ConstraintSet& set, const DriftCurve& drift,
                  double t, double a)
      : FrozenGenerator(utility, set, drift(t), checked(a)) {}

  double sqrt_a() const { return sqrt_a_; }
  double theta() const { return theta_; }
  const ConstraintSet& scaled_set() const { return scaled_; }

  /// Point whose projection onto A_a gives sqrt(a) times the optimal strategy.
  double target(double z) const {
    switch (kind_) {
      case Kind::Exponential:
        return sqrt_a_ * z + theta_ / param_;
      case Kind::Power:
        return (-sqrt_a_ * z + theta_) / (1.0 + param_);
      case Kind::Log:
        break;
    }
    return theta_;
  }

  double value(double z) const {
    const double x = target(z);
    const double d2 = full_ ? 0.0 : sq(distance(x, scaled_));
    switch (kind_) {
      case Kind::Exponential: {
        const double beta = param_;
        return -0.5 * beta * d2 + z * sqrt_a_ * theta_ + theta_ * theta_ / (2.0 * beta);
      }
      case Kind::Power: {
        const double gamma = param_;
        const double w = -sqrt_a_ * z + theta_;
        const double sz = sqrt_a_ * z;
        return -0.5 * gamma * (1.0 + gamma) * d2 + gamma * w * w / (2.0 * (1.0 + gamma)) + 0.5 * sz * sz;
      }
      case Kind::Log:
        break;
    }
    return -0.5 * d2 + 0.5 * theta_ * theta_;
  }

  /// dF/dz (defined wherever the projection is unique).
  double slope(double z) const {
    const double x = target(z);
    const double gap = full_ ? 0.0 : x - project(x, scaled_);
    switch (kind_) {
      case Kind::Exponential:
        return -param_ * gap * sqrt_a_ + sqrt_a_ * theta_;
      case Kind::Power: {
        const double gamma = param_;
        const double w = -sqrt_a_ * z + theta_;
        return gamma * sqrt_a_ * gap - gamma * sqrt_a_ * w / (1.0 + gamma) + sqrt_a_ * sqrt_a_ * z;
      }
      case Kind::Log:
        break;
    }
    return 0.0;
  }

  /// Optimal pi* (exponential, cash) or rho* (power/log, fraction of wealth).
  double strategy(double z) const { return project(target(z), scaled_) / sqrt_a_; }

 private:
  enum class Kind { Exponential, Power, Log };

  static double sq(double v) { return v * v; }
  static double checked(double a) {
    if (!(a > 0.0)) throw DomainError("generator requires a > 0");
    return a;
  }

  double sqrt_a_;
  double theta_;
  ConstraintSet scaled_;
  bool full_;
  Kind kind_ = Kind::Exponential;
  double param_ = 1.0;
};

inline double gen_exponential(const GeneratorInput& in, double beta, const ConstraintSet& set,
                              const DriftCurve& drift) {
  return FrozenGenerator(ExponentialUtility{beta}, set, drift, in.t, in.a).value(in.z);
}

inline double gen_power(const GeneratorInput& in, double gamma, const ConstraintSet& set,
                        const DriftCurve& drift) {
  return FrozenGenerator(PowerUtility{gamma}, set, drift, in.t, in.a).value(in.z);
}

/// The log generator does not depend on z.
inline double gen_log(double t, double a, const ConstraintSet& set, const DriftCurve& drift) {
  return FrozenGenerator(LogUtility{}, set, drift, t, a).value(0.0);
}

/// Dispatch on the utility of a market.
inline double generator(const UtilitySpec& utility, const GeneratorInput& in, const ConstraintSet& set,
                        const DriftCurve& drift) {
  return FrozenGenerator(utility, set, drift, in.t, in.a).value(in.z);
}

inline double strategy_exponential(double z, double a, double t, double beta, const ConstraintSet& set,
                                   const DriftCurve& drift) {
  return FrozenGenerator(ExponentialUtility{beta}, set, drift, t, a).strategy(z);
}

inline double strategy_power(double z, double a, double t, double gamma, const ConstraintSet& set,
                             const DriftCurve& drift) {
  return FrozenGenerator(PowerUtility{gamma}, set, drift, t, a).strategy(z);
}

inline double strategy_log(double a, double t, const ConstraintSet& set, const DriftCurve& drift) {
  return FrozenGenerator(LogUtility{}, set, drift, t, a).strategy(0.0);
}

/// Drift of the exponential value process for a candidate pi, divided by beta:
///   (beta/2)|sqrt(a) pi - (sqrt(a) z + theta/beta)|^2 - z sqrt(a) theta - theta^2/(2 beta) + F(z).
/// Nonnegative for every admissible pi, zero at the projected strategy.
inline double excess_drift_exponential(double pi, double z, double a, double t, double beta,
                                       const ConstraintSet& set, const DriftCurve& drift) {
  const FrozenGenerator gen(ExponentialUtility{beta}, set, drift, t, a);
  const double gap = gen.sqrt_a() * pi - gen.target(z);
  const double th = gen.theta();
  return 0.5 * beta * gap * gap - z * gen.sqrt_a() * th - th * th / (2.0 * beta) + gen.value(z);
}

/// Constants of |F(z)| <= c0 + c1 |sqrt(a) z|^2, valid for every a in the band and t in [0, T].
struct GrowthBound {
  double c0 = 0.0;
  double c1 = 0.0;
};

inline GrowthBound growth_bound(const UtilitySpec& utility, const ConstraintSet& set, const VolatilityBand& band,
                                double max_abs_drift) {
  const double th = max_abs_drift / std::sqrt(band.a_lo);
  // min_norm(A_a) = sqrt(a) min_norm(A) <= sqrt(a_hi) min_norm(A)
  const double k = std::sqrt(band.a_hi) * min_norm(set);
  return std::visit(
      [&](const auto& u) -> GrowthBound {
        using U = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<U, ExponentialUtility>) {
          const double beta = u.beta;
          const double r = th / beta + k;
          return {beta * r * r + 0.5 * th * th + th * th / (2.0 * beta), beta + 0.5};
        } else if constexpr (std::is_same_v<U, PowerUtility>) {
          const double g = u.gamma;
          return {3.0 * g * th * th / (1.0 + g) + g * (1.0 + g) * k * k, 3.0 * g / (1.0 + g) + 0.5};
        } else {
          return {0.5 * (th + k) * (th + k) + 0.5 * th * th, 0.0};
        }
      },
      utility);
}

}  // namespace uvolmax
