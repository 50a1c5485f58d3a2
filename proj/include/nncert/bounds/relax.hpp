// SPDX-License-Identifier: Apache-2.0
//
// Linear relaxations of scalar nonlinearities on an interval [l, u]: a
// lower and an upper line bracketing the function on the interval.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nncert/core/error.hpp"
#include "nncert/core/graph.hpp"
#include "nncert/scalars/real_interval.hpp"

namespace nncert {

/// s * z + b
struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double at(double z) const { return std::fma(slope, z, intercept); }
  friend bool operator==(const Line&, const Line&) = default;
};

struct LinePair {
  Line lower;
  Line upper;
};

/// ReLU relaxation with lower slope alpha and phase beta in {-1, 0, +1}.
/// beta = -1 asserts u <= 0, beta = +1 asserts 0 <= l; a conflicting box is
/// a PhaseError.
inline LinePair relu_relax(double l, double u, double alpha, int beta) {
  if (!(l <= u)) throw DomainError("relu_relax: l > u");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("relu_relax: alpha outside [0,1]");
  const LinePair zero{{0.0, 0.0}, {0.0, 0.0}};
  const LinePair ident{{1.0, 0.0}, {1.0, 0.0}};
  switch (beta) {
    case -1:
      if (!(u <= 0.0)) throw PhaseError("beta=-1 requires u <= 0, got u=" + std::to_string(u));
      return zero;
    case 1:
      if (!(0.0 <= l)) throw PhaseError("beta=+1 requires 0 <= l, got l=" + std::to_string(l));
      return ident;
    case 0: break;
    default: throw DomainError("relu_relax: beta must be -1, 0 or +1");
  }
  if (u <= 0.0) return zero;
  if (l >= 0.0) return ident;
  // Secant through (l, 0) and (u, u). The intercept is rounded up against
  // both endpoint constraints so the line stays above relu on [l, u].
  const double s = u / (u - l);
  const double b = std::max(directed::mul_up(-s, l), directed::sub_up(u, directed::mul_down(s, u)));
  return {{alpha, 0.0}, {s, b}};
}

/// Lower slope for units without an explicit alpha. It does not depend on
/// the box, so relaxations on nested boxes stay nested.
inline constexpr double kDefaultAlpha = 0.5;

namespace relax_detail {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Smooth {
  double (*f)(double);
  double (*df)(double);
  bool convex_left;   // convex on (-inf, 0]
  bool convex_right;  // convex on [0, inf)
  double range_lo;
  double range_hi;
};

inline double tanh_f(double z) { return std::tanh(z); }
inline double tanh_df(double z) {
  const double t = std::tanh(z);
  return 1.0 - t * t;
}
inline double sigmoid_f(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double sigmoid_df(double z) {
  const double s = sigmoid_f(z);
  return s * (1.0 - s);
}
inline double exp_f(double z) { return std::exp(z); }

inline Smooth smooth_for(OpTag tag) {
  switch (tag) {
    case OpTag::tanh: return {tanh_f, tanh_df, true, false, -1.0, 1.0};
    case OpTag::sigmoid: return {sigmoid_f, sigmoid_df, true, false, 0.0, 1.0};
    case OpTag::exp: return {exp_f, exp_f, true, true, 0.0, std::numeric_limits<double>::infinity()};
    default: throw Error("no smooth relaxation for this op");
  }
}

/// Pushes a line outward by a margin covering libm and rounding error.
inline Line shift(Line line, double margin, bool up) {
  line.intercept = up ? directed::add_up(line.intercept, margin) : directed::sub_down(line.intercept, margin);
  return line;
}

inline LinePair constant_pair(const Smooth& sm, double l, double u) {
  const double fl = sm.f(l), fu = sm.f(u);
  const Line lo{0.0, std::max(fl - 4 * kEps * std::fabs(fl), sm.range_lo)};
  const Line hi{0.0, std::min(fu + 4 * kEps * std::fabs(fu), sm.range_hi)};
  return {lo, hi};
}

}  // namespace relax_detail

/// Relaxation of tanh, sigmoid or exp on [l, u]. On a convex piece the
/// tangent at l is below and the secant above; on a concave piece the
/// secant is below and the tangent at u above. Intervals straddling an
/// inflection point get constant lines at the endpoint values. Each line
/// on a sub-interval lies between the parent interval's lines.
inline LinePair smooth_relax(OpTag tag, double l, double u) {
  using namespace relax_detail;
  if (!(l <= u)) throw DomainError("smooth_relax: l > u");
  const Smooth sm = smooth_for(tag);
  if (l == u || !std::isfinite(l) || !std::isfinite(u)) return constant_pair(sm, l, u);
  const bool convex = (u <= 0.0 && sm.convex_left) || (l >= 0.0 && sm.convex_right);
  const bool concave = (u <= 0.0 && !sm.convex_left) || (l >= 0.0 && !sm.convex_right);
  if (!convex && !concave) return constant_pair(sm, l, u);

  const double fl = sm.f(l), fu = sm.f(u);
  const double s_sec = (fu - fl) / (u - l);
  const Line secant{s_sec, fl - s_sec * l};
  const double m = convex ? l : u;
  const double fm = convex ? fl : fu;
  const double s_tan = sm.df(m);
  const Line tangent{s_tan, fm - s_tan * m};
  if (!std::isfinite(secant.intercept) || !std::isfinite(tangent.intercept)) return constant_pair(sm, l, u);

  const double scale = 1.0 + std::fabs(fl) + std::fabs(fu) + std::fabs(fm) +
                       (std::fabs(s_sec) + std::fabs(s_tan)) * (std::fabs(l) + std::fabs(u));
  const double margin = 16 * kEps * scale;
  if (convex) return {shift(tangent, margin, false), shift(secant, margin, true)};
  return {shift(secant, margin, false), shift(tangent, margin, true)};
}

inline LinePair tanh_relax(double l, double u) { return smooth_relax(OpTag::tanh, l, u); }

}  // namespace nncert
