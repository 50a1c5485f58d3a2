// SPDX-License-Identifier: Apache-2.0
//
// Round-on-R model of binary32: take a real (carried as binary64), return
// the binary32 grid value selected by the rounding mode. Implemented with
// exact power-of-two scaling on doubles; it does not share code with the
// bit-level kernel in nncert/ieee32, which is tested against it.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "nncert/core/error.hpp"

namespace nncert {

enum class RoundingMode { nearest_even, toward_neg_inf, toward_pos_inf };

inline constexpr const char* to_string(RoundingMode m) {
  switch (m) {
    case RoundingMode::nearest_even: return "nearestEven";
    case RoundingMode::toward_neg_inf: return "towardNegInf";
    case RoundingMode::toward_pos_inf: return "towardPosInf";
  }
  return "?";
}

inline constexpr double kFp32MaxFinite = 3.4028234663852886e38;  // (2 - 2^-23) * 2^127
inline constexpr double kFp32MinSubnormal = 1.401298464324817e-45;  // 2^-149

/// Rounds x onto the binary32 grid. Magnitudes beyond max-finite follow
/// IEEE overflow rules for the mode (nearest -> inf, directed -> max-finite
/// or inf on the side of the direction). Signed zero input is returned
/// unchanged. NaN input is rejected.
inline double fp32_round(double x, RoundingMode mode) {
  if (std::isnan(x)) throw DomainError("fp32_round of NaN");
  if (x == 0.0 || std::isinf(x)) return x;

  const bool neg = std::signbit(x);
  const double mag = std::fabs(x);
  int e = 0;
  std::frexp(mag, &e);  // mag in [2^(e-1), 2^e)
  const int quantum_exp = std::max(e - 1 - 23, -149);
  const double scaled = std::ldexp(mag, -quantum_exp);  // exact, < 2^24
  const double fl = std::floor(scaled);
  const double frac = scaled - fl;

  double r = fl;
  switch (mode) {
    case RoundingMode::nearest_even:
      if (frac > 0.5 || (frac == 0.5 && std::fmod(fl, 2.0) != 0.0)) r = fl + 1.0;
      break;
    case RoundingMode::toward_pos_inf:
      if (frac != 0.0 && !neg) r = fl + 1.0;
      break;
    case RoundingMode::toward_neg_inf:
      if (frac != 0.0 && neg) r = fl + 1.0;
      break;
  }
  double out = std::ldexp(r, quantum_exp);
  if (out > kFp32MaxFinite) {
    const bool to_inf = mode == RoundingMode::nearest_even ||
                        (mode == RoundingMode::toward_pos_inf && !neg) ||
                        (mode == RoundingMode::toward_neg_inf && neg);
    out = to_inf ? std::numeric_limits<double>::infinity() : kFp32MaxFinite;
  }
  return neg ? -out : out;
}

inline bool on_fp32_grid(double x) {
  return !std::isnan(x) && fp32_round(x, RoundingMode::nearest_even) == x;
}

}  // namespace nncert
