// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "nncert/ieee32/b32.hpp"
#include "nncert/ieee32/b32_interval.hpp"
#include "nncert/scalars/domain.hpp"

namespace nncert {

/// Executable binary32 semantics: every operation is the bit-level kernel
/// in round-to-nearest-even. Inf and NaN are ordinary values here.
struct Ieee32Exec {
  using value_type = ieee32::B32;
  using B32 = ieee32::B32;
  static const char* name() { return "ieee32"; }
  static B32 zero() { return ieee32::kPosZero; }
  static B32 one() { return B32(0x3F800000u); }
  static B32 from_double(double x) {
    if (x != x) return ieee32::kCanonicalNaN;
    return ieee32::from_real(x);
  }
  static double to_double(B32 a) {
    return a.is_nan() ? std::numeric_limits<double>::quiet_NaN() : ieee32::to_real(a);
  }
  static B32 add(B32 a, B32 b) { return ieee32::add(a, b); }
  static B32 sub(B32 a, B32 b) { return ieee32::sub(a, b); }
  static B32 mul(B32 a, B32 b) { return ieee32::mul(a, b); }
  static B32 div(B32 a, B32 b) { return ieee32::div(a, b); }
  static B32 neg(B32 a) { return ieee32::neg(a); }
  static B32 abs(B32 a) { return ieee32::abs(a); }
  static B32 min(B32 a, B32 b) { return ieee32::min(a, b); }
  static B32 max(B32 a, B32 b) { return ieee32::max(a, b); }
  static B32 sqr(B32 a) { return ieee32::mul(a, a); }
  static bool lt(B32 a, B32 b) { return ieee32::lt(a, b); }
  static bool le(B32 a, B32 b) { return ieee32::le(a, b); }
  static B32 exp(B32 a) { return ieee32::exp(a); }
  static B32 tanh(B32 a) { return ieee32::tanh(a); }
  static B32 sigmoid(B32 a) { return ieee32::sigmoid(a); }
  static B32 sqrt(B32 a) { return ieee32::sqrt(a); }
};

/// Directed-rounded binary32 endpoint intervals.
struct B32Intervals {
  using value_type = ieee32::B32Interval;
  using I = ieee32::B32Interval;
  static const char* name() { return "b32-interval"; }
  static I zero() { return I::point(ieee32::kPosZero); }
  static I one() { return I::point(B32One()); }
  /// Encloses the real x (not its nearest rounding).
  static I from_double(double x) {
    return {ieee32::from_real(x, RoundingMode::toward_neg_inf), ieee32::from_real(x, RoundingMode::toward_pos_inf)};
  }
  static I from_bounds(double lo, double hi) {
    return {ieee32::from_real(lo, RoundingMode::toward_neg_inf), ieee32::from_real(hi, RoundingMode::toward_pos_inf)};
  }
  static double lower(const I& a) { return ieee32::to_real(a.lo); }
  static double upper(const I& a) { return ieee32::to_real(a.hi); }
  static double to_double(const I& a) { return 0.5 * lower(a) + 0.5 * upper(a); }
  static I add(const I& a, const I& b) { return ieee32::b32i::add(a, b); }
  static I sub(const I& a, const I& b) { return ieee32::b32i::sub(a, b); }
  static I mul(const I& a, const I& b) { return ieee32::b32i::mul(a, b); }
  static I div(const I& a, const I& b) { return ieee32::b32i::div(a, b); }
  static I neg(const I& a) { return ieee32::b32i::neg(a); }
  static I abs(const I& a) { return ieee32::b32i::abs(a); }
  static I min(const I& a, const I& b) { return ieee32::b32i::min(a, b); }
  static I max(const I& a, const I& b) { return ieee32::b32i::max(a, b); }
  static I sqr(const I& a) { return ieee32::b32i::sqr(a); }
  static bool lt(const I& a, const I& b) { return ieee32::lt(a.hi, b.lo); }
  static bool le(const I& a, const I& b) { return ieee32::le(a.hi, b.lo); }
  static I exp(const I& a) { return ieee32::b32i::exp(a); }
  static I tanh(const I& a) { return ieee32::b32i::tanh(a); }
  static I sigmoid(const I& a) { return ieee32::b32i::sigmoid(a); }
  static I sqrt(const I& a) { return ieee32::b32i::sqrt(a); }
  static I hull(const I& a, const I& b) { return ieee32::b32i::hull(a, b); }
  static I intersect(const I& a, const I& b) { return ieee32::b32i::intersect(a, b); }
  static bool contains(const I& a, double x) { return lower(a) <= x && x <= upper(a); }

 private:
  static ieee32::B32 B32One() { return ieee32::B32(0x3F800000u); }
};

static_assert(ScalarDomain<Ieee32Exec>);
static_assert(IntervalDomain<B32Intervals>);

}  // namespace nncert
