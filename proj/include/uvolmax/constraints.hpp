#pragma once

// One-dimensional closed strategy sets and the exact distance / projection
// operators every generator is built on.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "uvolmax/errors.hpp"

namespace uvolmax {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct FullSpace {};

/// Closed interval [lo, hi]; either endpoint may be infinite.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

/// Finite union of pairwise disjoint closed intervals, sorted ascending.
struct UnionOfIntervals {
  std::vector<Interval> pieces;
};

class ConstraintSet {
 public:
  using Variant = std::variant<FullSpace, Interval, UnionOfIntervals>;

  ConstraintSet() = default;

  static ConstraintSet full() { return ConstraintSet(FullSpace{}); }

  static ConstraintSet interval(double lo, double hi) {
    check_interval(lo, hi);
    return ConstraintSet(Interval{lo, hi});
  }

  static ConstraintSet singleton(double c) { return interval(c, c); }

  static ConstraintSet union_of(std::vector<Interval> pieces) {
    if (pieces.empty()) throw DomainError("constraint union must contain at least one interval");
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      check_interval(pieces[i].lo, pieces[i].hi);
      if (i > 0 && !(pieces[i - 1].hi < pieces[i].lo))
        throw DomainError("constraint union intervals must be sorted and pairwise disjoint");
    }
    return ConstraintSet(UnionOfIntervals{std::move(pieces)});
  }

  const Variant& variant() const { return set_; }
  bool is_full() const { return std::holds_alternative<FullSpace>(set_); }

  /// Lower / upper bounds of the set (possibly infinite).
  double lower() const {
    if (auto* iv = std::get_if<Interval>(&set_)) return iv->lo;
    if (auto* un = std::get_if<UnionOfIntervals>(&set_)) return un->pieces.front().lo;
    return -kInf;
  }
  double upper() const {
    if (auto* iv = std::get_if<Interval>(&set_)) return iv->hi;
    if (auto* un = std::get_if<UnionOfIntervals>(&set_)) return un->pieces.back().hi;
    return kInf;
  }

  bool contains(double x) const {
    return std::visit(
        [x](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, FullSpace>) {
            return true;
          } else if constexpr (std::is_same_v<S, Interval>) {
            return s.lo <= x && x <= s.hi;
          } else {
            return std::any_of(s.pieces.begin(), s.pieces.end(),
                               [x](const Interval& p) { return p.lo <= x && x <= p.hi; });
          }
        },
        set_);
  }

  /// Pieces of the set as intervals (FullSpace is one unbounded interval).
  std::vector<Interval> pieces() const {
    if (auto* iv = std::get_if<Interval>(&set_)) return {*iv};
    if (auto* un = std::get_if<UnionOfIntervals>(&set_)) return un->pieces;
    return {Interval{}};
  }

  std::string describe() const;

 private:
  explicit ConstraintSet(Variant v) : set_(std::move(v)) {}

  static void check_interval(double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi)) throw DomainError("constraint endpoint is NaN");
    if (lo > hi) throw DomainError("constraint interval has lo > hi");
    if (lo == kInf || hi == -kInf) throw DomainError("constraint interval is empty");
  }

  Variant set_ = FullSpace{};
};

namespace detail {

inline double clamp_to(double x, const Interval& iv) {
  if (x < iv.lo) return iv.lo;
  if (x > iv.hi) return iv.hi;
  return x;
}

}  // namespace detail

/// Nearest point of `set` to x. Ties between two candidates go to the left one.
inline double project(double x, const ConstraintSet& set) {
  return std::visit(
      [x](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FullSpace>) {
          return x;
        } else if constexpr (std::is_same_v<S, Interval>) {
          return detail::clamp_to(x, s);
        } else {
          // First piece whose upper end is >= x; the answer is either inside it
          // or at the right end of its predecessor.
          const auto& ps = s.pieces;
          auto it = std::lower_bound(ps.begin(), ps.end(), x,
                                     [](const Interval& p, double v) { return p.hi < v; });
          if (it == ps.end()) return ps.back().hi;
          if (x >= it->lo) return x;
          if (it == ps.begin()) return it->lo;
          const double left = std::prev(it)->hi;
          const double right = it->lo;
          return (x - left <= right - x) ? left : right;
        }
      },
      set.variant());
}

/// inf over r in set of |x - r|. Exactly zero for FullSpace.
inline double distance(double x, const ConstraintSet& set) {
  if (set.is_full()) return 0.0;
  return std::abs(x - project(x, set));
}

/// The image sqrt(a) * set.
inline ConstraintSet scale_set(const ConstraintSet& set, double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("scale_set requires a finite a > 0");
  const double s = std::sqrt(a);
  return std::visit(
      [s](const auto& v) -> ConstraintSet {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, FullSpace>) {
          return ConstraintSet::full();
        } else if constexpr (std::is_same_v<S, Interval>) {
          return ConstraintSet::interval(s * v.lo, s * v.hi);
        } else {
          std::vector<Interval> out;
          out.reserve(v.pieces.size());
          for (const auto& p : v.pieces) out.push_back({s * p.lo, s * p.hi});
          return ConstraintSet::union_of(std::move(out));
        }
      },
      set.variant());
}

/// min{|r| : r in set}.
inline double min_norm(const ConstraintSet& set) { return distance(0.0, set); }

inline std::string ConstraintSet::describe() const {
  auto fmt = [](double v) {
    if (v == kInf) return std::string("inf");
    if (v == -kInf) return std::string("-inf");
    return std::to_string(v);
  };
  return std::visit(
      [&](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FullSpace>) {
          return "R";
        } else if constexpr (std::is_same_v<S, Interval>) {
          return "[" + fmt(s.lo) + ", " + fmt(s.hi) + "]";
        } else {
          std::string out;
          for (std::size_t i = 0; i < s.pieces.size(); ++i) {
            if (i) out += " U ";
            out += "[" + fmt(s.pieces[i].lo) + ", " + fmt(s.pieces[i].hi) + "]";
          }
          return out;
        }
      },
      set_);
}

}  // namespace uvolmax
