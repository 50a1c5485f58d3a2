// SPDX-License-Identifier: Apache-2.0
//
// Intervals with binary32 endpoints computed by the bit-level kernel:
// lower endpoints round toward -inf, upper toward +inf. Any operation that
// could yield NaN at some point of the operand boxes returns [-inf, +inf].

#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>

#include "nncert/core/error.hpp"
#include "nncert/ieee32/b32.hpp"
#include "nncert/scalars/real_interval.hpp"

namespace nncert::ieee32 {

struct B32Interval {
  B32 lo = kPosZero;
  B32 hi = kPosZero;

  B32Interval() = default;
  B32Interval(B32 l, B32 h) : lo(l), hi(h) {
    if (l.is_nan() || h.is_nan() || lt(h, l)) {
      throw DomainError("invalid binary32 interval [" + format_b32_hex(l) + ", " + format_b32_hex(h) + "]");
    }
  }

  static B32Interval point(B32 x) { return {x, x}; }
  static B32Interval entire() { return {kNegInf, kPosInf}; }

  bool is_entire() const { return lo == kNegInf && hi == kPosInf; }
  bool contains(B32 x) const { return !x.is_nan() && le(lo, x) && le(x, hi); }
  /// True when +0 or -0 lies in the box (the two compare equal).
  bool contains_zero() const { return le(lo, kPosZero) && le(kPosZero, hi); }
  bool has_infinite_endpoint() const { return lo.is_inf() || hi.is_inf(); }

  friend bool operator==(const B32Interval&, const B32Interval&) = default;
};

inline RealInterval to_real_interval(const B32Interval& a) { return {to_real(a.lo), to_real(a.hi)}; }

/// Smallest binary32 interval enclosing a real interval.
inline B32Interval from_real_interval(const RealInterval& a) {
  return {from_real(a.lo, RoundingMode::toward_neg_inf), from_real(a.hi, RoundingMode::toward_pos_inf)};
}

namespace b32i {

namespace detail {

inline B32 min_of(std::initializer_list<B32> xs) {
  B32 m = *xs.begin();
  for (B32 x : xs) m = min(m, x);
  return m;
}

inline B32 max_of(std::initializer_list<B32> xs) {
  B32 m = *xs.begin();
  for (B32 x : xs) m = max(m, x);
  return m;
}

inline B32Interval checked(B32 lo, B32 hi) {
  if (lo.is_nan() || hi.is_nan()) return B32Interval::entire();
  return {lo, hi};
}

}  // namespace detail

constexpr RoundingMode kDown = RoundingMode::toward_neg_inf;
constexpr RoundingMode kUp = RoundingMode::toward_pos_inf;

inline B32Interval add(const B32Interval& a, const B32Interval& b) {
  return detail::checked(ieee32::add(a.lo, b.lo, kDown), ieee32::add(a.hi, b.hi, kUp));
}

inline B32Interval sub(const B32Interval& a, const B32Interval& b) {
  return detail::checked(ieee32::sub(a.lo, b.hi, kDown), ieee32::sub(a.hi, b.lo, kUp));
}

inline B32Interval neg(const B32Interval& a) { return {ieee32::neg(a.hi), ieee32::neg(a.lo)}; }

inline B32Interval mul(const B32Interval& a, const B32Interval& b) {
  // 0 * inf can arise inside the box even when no corner is NaN.
  if ((a.contains_zero() && b.has_infinite_endpoint()) || (b.contains_zero() && a.has_infinite_endpoint())) {
    return B32Interval::entire();
  }
  using ieee32::mul;
  const B32 lo = detail::min_of({mul(a.lo, b.lo, kDown), mul(a.lo, b.hi, kDown), mul(a.hi, b.lo, kDown), mul(a.hi, b.hi, kDown)});
  const B32 hi = detail::max_of({mul(a.lo, b.lo, kUp), mul(a.lo, b.hi, kUp), mul(a.hi, b.lo, kUp), mul(a.hi, b.hi, kUp)});
  return detail::checked(lo, hi);
}

/// Widens whenever the denominator box holds +0 or -0.
inline B32Interval div(const B32Interval& a, const B32Interval& b) {
  if (b.contains_zero()) return B32Interval::entire();
  if (a.has_infinite_endpoint() && b.has_infinite_endpoint()) return B32Interval::entire();
  using ieee32::div;
  const B32 lo = detail::min_of({div(a.lo, b.lo, kDown), div(a.lo, b.hi, kDown), div(a.hi, b.lo, kDown), div(a.hi, b.hi, kDown)});
  const B32 hi = detail::max_of({div(a.lo, b.lo, kUp), div(a.lo, b.hi, kUp), div(a.hi, b.lo, kUp), div(a.hi, b.hi, kUp)});
  return detail::checked(lo, hi);
}

inline B32Interval sqr(const B32Interval& a) {
  using ieee32::mul;
  if (a.contains_zero()) return {kPosZero, max(mul(a.lo, a.lo, kUp), mul(a.hi, a.hi, kUp))};
  if (lt(kPosZero, a.lo)) return {mul(a.lo, a.lo, kDown), mul(a.hi, a.hi, kUp)};
  return {mul(a.hi, a.hi, kDown), mul(a.lo, a.lo, kUp)};
}

inline B32Interval abs(const B32Interval& a) {
  if (le(kPosZero, a.lo)) return {ieee32::abs(a.lo), a.hi};
  if (le(a.hi, kPosZero)) return {ieee32::abs(a.hi), ieee32::abs(a.lo)};
  return {kPosZero, max(ieee32::abs(a.lo), a.hi)};
}

inline B32Interval min(const B32Interval& a, const B32Interval& b) {
  return {ieee32::min(a.lo, b.lo), ieee32::min(a.hi, b.hi)};
}

inline B32Interval max(const B32Interval& a, const B32Interval& b) {
  return {ieee32::max(a.lo, b.lo), ieee32::max(a.hi, b.hi)};
}

inline B32Interval sqrt(const B32Interval& a) {
  if (lt(a.lo, kPosZero)) return B32Interval::entire();
  return {ieee32::sqrt(a.lo, kDown), ieee32::sqrt(a.hi, kUp)};
}

// The point transcendentals are libm-then-round; one extra binary32 ulp on
// each side absorbs both the rounding and libm error, then the result is
// clipped to the function's range.
template <class F>
B32Interval monotone(const B32Interval& a, F f, B32 range_lo, B32 range_hi) {
  const B32 lo = max(next_down(f(a.lo)), range_lo);
  const B32 hi = ieee32::min(next_up(f(a.hi)), range_hi);
  return {ieee32::min(lo, hi), max(lo, hi)};
}

inline B32Interval exp(const B32Interval& a) {
  return monotone(a, [](B32 x) { return ieee32::exp(x); }, kPosZero, kPosInf);
}

inline B32Interval tanh(const B32Interval& a) {
  return monotone(a, [](B32 x) { return ieee32::tanh(x); }, B32(0xBF800000u), B32(0x3F800000u));
}

inline B32Interval sigmoid(const B32Interval& a) {
  return monotone(a, [](B32 x) { return ieee32::sigmoid(x); }, kPosZero, B32(0x3F800000u));
}

inline B32Interval hull(const B32Interval& a, const B32Interval& b) {
  return {ieee32::min(a.lo, b.lo), max(a.hi, b.hi)};
}

inline B32Interval intersect(const B32Interval& a, const B32Interval& b) {
  const B32 lo = max(a.lo, b.lo);
  const B32 hi = ieee32::min(a.hi, b.hi);
  if (lt(hi, lo)) throw DomainError("empty binary32 interval intersection");
  return {lo, hi};
}

}  // namespace b32i

}  // namespace nncert::ieee32
