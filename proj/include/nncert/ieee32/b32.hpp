// SPDX-License-Identifier: Apache-2.0
//
// Software IEEE-754 binary32 arithmetic on raw bit patterns.
//
// All arithmetic is done on integer significands: operands are unpacked to
// (sign, sig, exp) with value sig * 2^exp, combined exactly (or with a
// sticky bit recording discarded nonzero bits), and a single rounding
// routine packs the result for the requested mode. Host floating point is
// used only by to_real(), which is exact, and by the transcendental
// wrappers, which are an explicit binary64 delegation.
//
// NaN policy: every NaN result is the canonical quiet NaN 0x7FC00000.
// min/max propagate NaN. Subnormals are fully supported.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include "nncert/core/error.hpp"
#include "nncert/scalars/literal.hpp"
#include "nncert/scalars/rounding.hpp"

namespace nncert::ieee32 {

enum class FpClass { zero, subnormal, normal, infinite, nan };

class B32 {
 public:
  constexpr B32() = default;
  constexpr explicit B32(std::uint32_t bits) : bits_(bits) {}

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool sign() const { return (bits_ >> 31) != 0; }
  constexpr std::uint32_t exponent() const { return (bits_ >> 23) & 0xFFu; }
  constexpr std::uint32_t significand() const { return bits_ & 0x7FFFFFu; }

  constexpr FpClass classify() const {
    const auto e = exponent();
    const auto f = significand();
    if (e == 0xFF) return f == 0 ? FpClass::infinite : FpClass::nan;
    if (e == 0) return f == 0 ? FpClass::zero : FpClass::subnormal;
    return FpClass::normal;
  }

  constexpr bool is_nan() const { return classify() == FpClass::nan; }
  constexpr bool is_inf() const { return classify() == FpClass::infinite; }
  constexpr bool is_zero() const { return classify() == FpClass::zero; }
  constexpr bool is_finite() const { return exponent() != 0xFF; }

  /// Bitwise identity (distinguishes +0/-0 and NaN payloads).
  friend constexpr bool operator==(B32, B32) = default;

 private:
  std::uint32_t bits_ = 0;
};

inline constexpr B32 kCanonicalNaN{0x7FC00000u};
inline constexpr B32 kPosInf{0x7F800000u};
inline constexpr B32 kNegInf{0xFF800000u};
inline constexpr B32 kPosZero{0x00000000u};
inline constexpr B32 kNegZero{0x80000000u};
inline constexpr B32 kMaxFinite{0x7F7FFFFFu};
inline constexpr B32 kMinSubnormal{0x00000001u};

constexpr B32 signed_zero(bool neg) { return neg ? kNegZero : kPosZero; }
constexpr B32 signed_inf(bool neg) { return neg ? kNegInf : kPosInf; }

namespace detail {

/// Finite nonzero value as sig * 2^exp.
struct Unpacked {
  bool sign;
  int exp;
  std::uint64_t sig;
};

constexpr Unpacked unpack(B32 v) {
  const auto e = static_cast<int>(v.exponent());
  std::uint64_t sig = v.significand();
  if (e != 0) sig |= 0x800000u;
  return {v.sign(), (e == 0 ? 1 : e) - 150, sig};
}

/// Shifts sig left so bit 23 is its leading bit (for subnormal operands).
constexpr void normalize24(Unpacked& u) {
  const int w = std::bit_width(u.sig);
  u.sig <<= (24 - w);
  u.exp -= (24 - w);
}

constexpr B32 overflow(bool neg, RoundingMode mode) {
  const bool to_inf = mode == RoundingMode::nearest_even || (mode == RoundingMode::toward_pos_inf && !neg) ||
                      (mode == RoundingMode::toward_neg_inf && neg);
  if (to_inf) return signed_inf(neg);
  return B32((neg ? 0x80000000u : 0u) | kMaxFinite.bits());
}

/// Rounds sig * 2^exp (plus a nonzero fraction below sig's unit when
/// sticky is set) to binary32. sig must be nonzero.
constexpr B32 round_pack(bool neg, int exp, std::uint64_t sig, bool sticky, RoundingMode mode) {
  // Bring the leading bit to position 62 so at least 39 bits lie below the
  // binary32 quantum; the sticky bit then only breaks exact ties.
  int w = std::bit_width(sig);
  if (w == 64) {
    sticky = sticky || (sig & 1u);
    sig >>= 1;
    exp += 1;
    w = 63;
  }
  sig <<= (63 - w);
  exp -= (63 - w);

  const int top = exp + 62;
  int quantum = std::max(top - 23, -149);
  const int shift = quantum - exp;  // >= 39

  std::uint64_t kept = 0;
  bool above_half = false;
  bool tie = false;
  bool inexact = true;
  if (shift < 64) {
    kept = sig >> shift;
    const std::uint64_t rem = sig & ((std::uint64_t{1} << shift) - 1);
    const std::uint64_t half = std::uint64_t{1} << (shift - 1);
    above_half = rem > half || (rem == half && sticky);
    tie = rem == half && !sticky;
    inexact = rem != 0 || sticky;
  }
  // shift >= 64: the whole value lies below half a quantum.

  bool inc = false;
  switch (mode) {
    case RoundingMode::nearest_even: inc = above_half || (tie && (kept & 1u)); break;
    case RoundingMode::toward_pos_inf: inc = inexact && !neg; break;
    case RoundingMode::toward_neg_inf: inc = inexact && neg; break;
  }
  kept += inc ? 1u : 0u;

  const std::uint32_t sign_bit = neg ? 0x80000000u : 0u;
  if (kept == 0) return B32(sign_bit);
  if (kept >> 24) {  // carry out of 24 bits: kept == 2^24
    kept >>= 1;
    quantum += 1;
  }
  if (kept < 0x800000u) return B32(sign_bit | static_cast<std::uint32_t>(kept));  // subnormal
  const int biased = quantum + 150;
  if (biased >= 255) return overflow(neg, mode);
  return B32(sign_bit | (static_cast<std::uint32_t>(biased) << 23) | (static_cast<std::uint32_t>(kept) & 0x7FFFFFu));
}

constexpr std::uint64_t isqrt_rem(std::uint64_t n, std::uint64_t& rem) {
  std::uint64_t res = 0;
  std::uint64_t bit = std::uint64_t{1} << 62;
  while (bit > n) bit >>= 2;
  while (bit != 0) {
    if (n >= res + bit) {
      n -= res + bit;
      res = (res >> 1) + bit;
    } else {
      res >>= 1;
    }
    bit >>= 2;
  }
  rem = n;
  return res;
}

constexpr std::uint32_t magnitude(B32 v) { return v.bits() & 0x7FFFFFFFu; }

/// Total order key for non-NaN values; +0 and -0 share key 0.
constexpr std::int64_t order_key(B32 v) {
  const auto m = static_cast<std::int64_t>(magnitude(v));
  return v.sign() ? -m : m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

constexpr B32 add(B32 a, B32 b, RoundingMode mode = RoundingMode::nearest_even) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  if (a.is_inf() || b.is_inf()) {
    if (a.is_inf() && b.is_inf() && a.sign() != b.sign()) return kCanonicalNaN;
    return a.is_inf() ? a : b;
  }
  if (a.is_zero() && b.is_zero()) {
    const bool neg = mode == RoundingMode::toward_neg_inf ? (a.sign() || b.sign()) : (a.sign() && b.sign());
    return signed_zero(neg);
  }
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;

  auto x = detail::unpack(a);
  auto y = detail::unpack(b);
  if (detail::magnitude(a) < detail::magnitude(b)) std::swap(x, y);

  const std::uint64_t big = x.sig << 38;
  const int exp = x.exp - 38;
  const int sh = y.exp - exp;
  std::uint64_t small = 0;
  bool sticky = false;
  if (sh >= 0) {
    small = y.sig << sh;
  } else if (-sh >= 64) {
    sticky = true;
  } else {
    small = y.sig >> -sh;
    sticky = (y.sig & ((std::uint64_t{1} << -sh) - 1)) != 0;
  }

  if (x.sign == y.sign) return detail::round_pack(x.sign, exp, big + small, sticky, mode);
  // A sticky remainder on the subtrahend means the true difference lies
  // strictly inside (big - small - 1, big - small).
  const std::uint64_t diff = big - small - (sticky ? 1u : 0u);
  if (diff == 0 && !sticky) return signed_zero(mode == RoundingMode::toward_neg_inf);
  return detail::round_pack(x.sign, exp, diff, sticky, mode);
}

constexpr B32 neg(B32 a) {
  if (a.is_nan()) return kCanonicalNaN;
  return B32(a.bits() ^ 0x80000000u);
}

constexpr B32 abs(B32 a) {
  if (a.is_nan()) return kCanonicalNaN;
  return B32(a.bits() & 0x7FFFFFFFu);
}

constexpr B32 sub(B32 a, B32 b, RoundingMode mode = RoundingMode::nearest_even) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  return add(a, neg(b), mode);
}

constexpr B32 mul(B32 a, B32 b, RoundingMode mode = RoundingMode::nearest_even) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  const bool neg_result = a.sign() != b.sign();
  if (a.is_inf() || b.is_inf()) {
    if (a.is_zero() || b.is_zero()) return kCanonicalNaN;
    return signed_inf(neg_result);
  }
  if (a.is_zero() || b.is_zero()) return signed_zero(neg_result);
  const auto x = detail::unpack(a);
  const auto y = detail::unpack(b);
  return detail::round_pack(neg_result, x.exp + y.exp, x.sig * y.sig, false, mode);
}

constexpr B32 div(B32 a, B32 b, RoundingMode mode = RoundingMode::nearest_even) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  const bool neg_result = a.sign() != b.sign();
  if (a.is_inf()) return b.is_inf() ? kCanonicalNaN : signed_inf(neg_result);
  if (b.is_inf()) return signed_zero(neg_result);
  if (b.is_zero()) return a.is_zero() ? kCanonicalNaN : signed_inf(neg_result);
  if (a.is_zero()) return signed_zero(neg_result);
  auto x = detail::unpack(a);
  auto y = detail::unpack(b);
  detail::normalize24(x);
  detail::normalize24(y);
  const std::uint64_t num = x.sig << 39;
  const std::uint64_t q = num / y.sig;
  const bool sticky = (num % y.sig) != 0;
  return detail::round_pack(neg_result, x.exp - 39 - y.exp, q, sticky, mode);
}

constexpr B32 sqrt(B32 a, RoundingMode mode = RoundingMode::nearest_even) {
  if (a.is_nan()) return kCanonicalNaN;
  if (a.is_zero()) return a;
  if (a.sign()) return kCanonicalNaN;
  if (a.is_inf()) return a;
  auto x = detail::unpack(a);
  detail::normalize24(x);
  // Scale to an even exponent with the radicand just below 2^63.
  const int s = ((x.exp - 39) % 2 == 0) ? 39 : 38;
  const std::uint64_t n = x.sig << s;
  std::uint64_t rem = 0;
  const std::uint64_t r = detail::isqrt_rem(n, rem);
  return detail::round_pack(false, (x.exp - s) / 2, r, rem != 0, mode);
}

// ---------------------------------------------------------------------------
// Comparison (IEEE: NaN is unordered, -0 == +0)

constexpr bool lt(B32 a, B32 b) {
  if (a.is_nan() || b.is_nan()) return false;
  return detail::order_key(a) < detail::order_key(b);
}

constexpr bool le(B32 a, B32 b) {
  if (a.is_nan() || b.is_nan()) return false;
  return detail::order_key(a) <= detail::order_key(b);
}

constexpr bool num_eq(B32 a, B32 b) {
  if (a.is_nan() || b.is_nan()) return false;
  return detail::order_key(a) == detail::order_key(b);
}

/// Returns one of its operands; -0 is taken as below +0.
constexpr B32 min(B32 a, B32 b) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  if (a.is_zero() && b.is_zero()) return a.sign() ? a : b;
  return lt(b, a) ? b : a;
}

constexpr B32 max(B32 a, B32 b) {
  if (a.is_nan() || b.is_nan()) return kCanonicalNaN;
  if (a.is_zero() && b.is_zero()) return a.sign() ? b : a;
  return lt(a, b) ? b : a;
}

constexpr B32 next_up(B32 a) {
  if (a.is_nan()) return kCanonicalNaN;
  if (a == kPosInf) return a;
  if (a.is_zero()) return kMinSubnormal;
  return a.sign() ? B32(a.bits() - 1) : B32(a.bits() + 1);
}

constexpr B32 next_down(B32 a) { return neg(next_up(neg(a))); }

// ---------------------------------------------------------------------------
// Conversions

/// Rounds a binary64 value to binary32 in the given mode; NaN is rejected.
constexpr B32 from_real(double x, RoundingMode mode = RoundingMode::nearest_even) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const bool neg_x = (bits >> 63) != 0;
  const auto e = static_cast<int>((bits >> 52) & 0x7FF);
  std::uint64_t frac = bits & ((std::uint64_t{1} << 52) - 1);
  if (e == 0x7FF) {
    if (frac != 0) throw DomainError("from_real: NaN input");
    return signed_inf(neg_x);
  }
  if (e == 0 && frac == 0) return signed_zero(neg_x);
  if (e != 0) frac |= std::uint64_t{1} << 52;
  return detail::round_pack(neg_x, (e == 0 ? 1 : e) - 1075, frac, false, mode);
}

/// Exact binary64 value of a finite or infinite pattern; NaN is signalled.
inline double to_real(B32 v) {
  if (v.is_nan()) throw DomainError("to_real: NaN");
  if (v.is_inf()) return v.sign() ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  if (v.is_zero()) return v.sign() ? -0.0 : 0.0;
  const auto u = detail::unpack(v);
  const double m = std::ldexp(static_cast<double>(u.sig), u.exp);
  return u.sign ? -m : m;
}

inline B32 parse_b32_hex(std::string_view s) { return B32(parse_hex32(s)); }
inline std::string format_b32_hex(B32 v) { return format_hex32(v.bits()); }

// ---------------------------------------------------------------------------
// Transcendentals: evaluated in binary64 by the host libm, then rounded to
// nearest binary32. This is a declared trust boundary, not a correctly
// rounded implementation.

inline B32 exp(B32 x) {
  if (x.is_nan()) return kCanonicalNaN;
  return from_real(std::exp(to_real(x)));
}

inline B32 tanh(B32 x) {
  if (x.is_nan()) return kCanonicalNaN;
  return from_real(std::tanh(to_real(x)));
}

inline B32 sigmoid(B32 x) {
  if (x.is_nan()) return kCanonicalNaN;
  return from_real(1.0 / (1.0 + std::exp(-to_real(x))));
}

}  // namespace nncert::ieee32
