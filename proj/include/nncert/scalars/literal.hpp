// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include "nncert/core/error.hpp"
#include "nncert/scalars/rounding.hpp"

namespace nncert {

inline bool is_hex32_literal(std::string_view s) {
  if (s.size() != 10 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return false;
  for (std::size_t i = 2; i < s.size(); ++i) {
    if (!std::isxdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

inline std::uint32_t parse_hex32(std::string_view s) {
  if (!is_hex32_literal(s)) throw ParseError(std::string(s), "expected 0x followed by 8 hex digits");
  std::uint32_t bits = 0;
  std::from_chars(s.data() + 2, s.data() + s.size(), bits, 16);
  return bits;
}

inline std::string format_hex32(std::uint32_t bits) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08X", bits);
  return buf;
}

/// Bits of a binary32 grid value (the double must already be on the grid).
inline std::uint32_t fp32_bits(double grid_value) {
  return std::bit_cast<std::uint32_t>(static_cast<float>(grid_value));
}

inline double fp32_from_bits(std::uint32_t bits) { return static_cast<double>(std::bit_cast<float>(bits)); }

/// Parses a decimal or "0x........" binary32 literal to a binary32 grid
/// value. Decimal text is rounded to nearest-even; hex is taken bit-exact.
/// NaN patterns are rejected.
inline double parse_fp32_literal(std::string_view s) {
  double v = 0.0;
  if (is_hex32_literal(s)) {
    v = fp32_from_bits(parse_hex32(s));
  } else {
    auto first = s.data();
    auto last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) {
      // from_chars leaves v untouched on range errors; fall back to strtod.
      v = std::strtod(std::string(s).c_str(), nullptr);
    } else if (ec != std::errc() || ptr != last) {
      throw ParseError(std::string(s), "not a decimal or hex binary32 literal");
    }
    if (std::isnan(v)) throw ParseError(std::string(s), "NaN literal");
    v = fp32_round(v, RoundingMode::nearest_even);
  }
  if (std::isnan(v)) throw ParseError(std::string(s), "NaN literal");
  return v;
}

/// Shortest decimal text that parses back to the same binary32 value.
inline std::string format_fp32_decimal(double grid_value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<float>(grid_value));
  return std::string(buf, ptr);
}

}  // namespace nncert
