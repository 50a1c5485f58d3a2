// SPDX-License-Identifier: Apache-2.0
//
// Outward-rounded binary64 intervals. Each endpoint operation detects
// whether the round-to-nearest result was exact (error-free transforms:
// two-sum, fma residuals) and steps one ulp outward only when it was not.
// Transcendentals come from libm with no error bound, so both endpoints
// are always pushed out by two ulps.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nncert/core/error.hpp"

namespace nncert {

namespace directed {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kMax = std::numeric_limits<double>::max();

inline double down(double x) { return std::nextafter(x, -kInf); }
inline double up(double x) { return std::nextafter(x, kInf); }

// Round-to-nearest overflowed although the exact value is finite.
inline double clamp_overflow_down(double r) { return r == kInf ? kMax : r; }
inline double clamp_overflow_up(double r) { return r == -kInf ? -kMax : r; }

/// Sign of (exact a+b) - fl(a+b); valid when fl(a+b) is finite.
inline double add_residual(double a, double b, double s) {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}

inline double add_down(double a, double b) {
  const double s = a + b;
  if (!std::isfinite(s)) return std::isfinite(a) && std::isfinite(b) ? clamp_overflow_down(s) : s;
  return add_residual(a, b, s) < 0 ? down(s) : s;
}

inline double add_up(double a, double b) {
  const double s = a + b;
  if (!std::isfinite(s)) return std::isfinite(a) && std::isfinite(b) ? clamp_overflow_up(s) : s;
  return add_residual(a, b, s) > 0 ? up(s) : s;
}

inline double sub_down(double a, double b) { return add_down(a, -b); }
inline double sub_up(double a, double b) { return add_up(a, -b); }

// 0 * inf is taken as 0: interval endpoints at infinity stand for unbounded
// real sets, not for an infinite point.
inline double mul_down(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (!std::isfinite(p)) return std::isfinite(a) && std::isfinite(b) ? clamp_overflow_down(p) : p;
  if (p == 0) return std::signbit(p) ? down(p) : 0.0;  // underflow keeps the exact sign
  if (std::fabs(p) < std::numeric_limits<double>::min()) return down(p);
  return std::fma(a, b, -p) < 0 ? down(p) : p;
}

inline double mul_up(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (!std::isfinite(p)) return std::isfinite(a) && std::isfinite(b) ? clamp_overflow_up(p) : p;
  if (p == 0) return std::signbit(p) ? 0.0 : up(p);
  if (std::fabs(p) < std::numeric_limits<double>::min()) return up(p);
  return std::fma(a, b, -p) > 0 ? up(p) : p;
}

inline double div_down(double a, double b) {
  if (a == 0.0) return 0.0;
  const double q = a / b;
  if (std::isinf(b)) return q < 0 || (q == 0 && std::signbit(a) != std::signbit(b)) ? down(q) : q;
  if (!std::isfinite(q)) return std::isfinite(a) ? clamp_overflow_down(q) : q;
  if (q == 0) return std::signbit(q) ? down(q) : 0.0;
  if (std::fabs(q) < std::numeric_limits<double>::min()) return down(q);
  const double r = std::fma(-q, b, a);  // exact a - q*b
  const bool q_too_big = (r < 0) != (b < 0) && r != 0;
  return q_too_big ? down(q) : q;
}

inline double div_up(double a, double b) {
  if (a == 0.0) return 0.0;
  const double q = a / b;
  if (std::isinf(b)) return q > 0 || (q == 0 && std::signbit(a) == std::signbit(b)) ? up(q) : q;
  if (!std::isfinite(q)) return std::isfinite(a) ? clamp_overflow_up(q) : q;
  if (q == 0) return std::signbit(q) ? 0.0 : up(q);
  if (std::fabs(q) < std::numeric_limits<double>::min()) return up(q);
  const double r = std::fma(-q, b, a);
  const bool q_too_small = (r > 0) != (b < 0) && r != 0;
  return q_too_small ? up(q) : q;
}

inline double sqrt_down(double x) {
  const double s = std::sqrt(x);
  if (!std::isfinite(s) || s == 0) return s;
  return std::fma(-s, s, x) < 0 ? down(s) : s;
}

inline double sqrt_up(double x) {
  const double s = std::sqrt(x);
  if (!std::isfinite(s) || s == 0) return s;
  return std::fma(-s, s, x) > 0 ? up(s) : s;
}

}  // namespace directed

/// Closed real interval [lo, hi]; endpoints may be infinite.
struct RealInterval {
  double lo = 0.0;
  double hi = 0.0;

  RealInterval() = default;
  RealInterval(double l, double h) : lo(l), hi(h) {
    if (std::isnan(l) || std::isnan(h) || l > h) {
      throw DomainError("invalid interval [" + std::to_string(l) + ", " + std::to_string(h) + "]");
    }
  }

  static RealInterval point(double x) { return {x, x}; }
  static RealInterval entire() { return {-directed::kInf, directed::kInf}; }

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const RealInterval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
  bool is_point() const { return lo == hi; }
  double width() const { return hi - lo; }

  friend bool operator==(const RealInterval&, const RealInterval&) = default;
};

namespace interval {

inline RealInterval add(const RealInterval& a, const RealInterval& b) {
  return {directed::add_down(a.lo, b.lo), directed::add_up(a.hi, b.hi)};
}

inline RealInterval sub(const RealInterval& a, const RealInterval& b) {
  return {directed::sub_down(a.lo, b.hi), directed::sub_up(a.hi, b.lo)};
}

inline RealInterval neg(const RealInterval& a) { return {-a.hi, -a.lo}; }

inline RealInterval mul(const RealInterval& a, const RealInterval& b) {
  using namespace directed;
  const double lo = std::min({mul_down(a.lo, b.lo), mul_down(a.lo, b.hi), mul_down(a.hi, b.lo), mul_down(a.hi, b.hi)});
  const double hi = std::max({mul_up(a.lo, b.lo), mul_up(a.lo, b.hi), mul_up(a.hi, b.lo), mul_up(a.hi, b.hi)});
  return {lo, hi};
}

/// Division through an interval containing zero widens to the whole line.
inline RealInterval div(const RealInterval& a, const RealInterval& b) {
  using namespace directed;
  if (b.contains_zero()) return RealInterval::entire();
  const double lo = std::min({div_down(a.lo, b.lo), div_down(a.lo, b.hi), div_down(a.hi, b.lo), div_down(a.hi, b.hi)});
  const double hi = std::max({div_up(a.lo, b.lo), div_up(a.lo, b.hi), div_up(a.hi, b.lo), div_up(a.hi, b.hi)});
  return {lo, hi};
}

inline RealInterval sqr(const RealInterval& a) {
  using namespace directed;
  if (a.contains_zero()) return {0.0, std::max(mul_up(a.lo, a.lo), mul_up(a.hi, a.hi))};
  if (a.lo > 0) return {mul_down(a.lo, a.lo), mul_up(a.hi, a.hi)};
  return {mul_down(a.hi, a.hi), mul_up(a.lo, a.lo)};
}

inline RealInterval abs(const RealInterval& a) {
  if (a.lo >= 0) return a;
  if (a.hi <= 0) return neg(a);
  return {0.0, std::max(-a.lo, a.hi)};
}

inline RealInterval min(const RealInterval& a, const RealInterval& b) {
  return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}

inline RealInterval max(const RealInterval& a, const RealInterval& b) {
  return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline RealInterval sqrt(const RealInterval& a) {
  if (a.hi < 0) throw DomainError("sqrt of a negative interval");
  return {directed::sqrt_down(std::max(a.lo, 0.0)), directed::sqrt_up(a.hi)};
}

// Monotone libm functions: endpoints pushed out two ulps, then clipped to
// the function's range.
template <class F>
RealInterval monotone(const RealInterval& a, F f, double range_lo, double range_hi) {
  using directed::down;
  using directed::up;
  const double lo = std::max(down(down(f(a.lo))), range_lo);
  const double hi = std::min(up(up(f(a.hi))), range_hi);
  return {std::min(lo, hi), std::max(lo, hi)};
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline RealInterval exp(const RealInterval& a) {
  return monotone(a, [](double x) { return std::exp(x); }, 0.0, directed::kInf);
}

inline RealInterval tanh(const RealInterval& a) {
  return monotone(a, [](double x) { return std::tanh(x); }, -1.0, 1.0);
}

inline RealInterval sigmoid(const RealInterval& a) { return monotone(a, sigmoid_scalar, 0.0, 1.0); }

inline RealInterval hull(const RealInterval& a, const RealInterval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

/// Intersection; an empty result is reported as a DomainError since it
/// means one of the enclosures was unsound.
inline RealInterval intersect(const RealInterval& a, const RealInterval& b) {
  const double lo = std::max(a.lo, b.lo);
  const double hi = std::min(a.hi, b.hi);
  if (lo > hi) throw DomainError("empty interval intersection");
  return {lo, hi};
}

}  // namespace interval

}  // namespace nncert
