// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <random>

#include "nncert/ieee32/b32.hpp"
#include "nncert/ieee32/b32_interval.hpp"
#include "nncert/ieee32/domain.hpp"
#include "support/host_float.hpp"

using namespace nncert;
using namespace nncert::ieee32;
using nncert::testing::host_op;
using nncert::testing::HostOp;
using nncert::testing::same_value;

namespace {

B32 f(float x) { return B32(std::bit_cast<std::uint32_t>(x)); }
float hf(B32 x) { return std::bit_cast<float>(x.bits()); }

B32 kernel(HostOp op, B32 a, B32 b, RoundingMode m) {
  switch (op) {
    case HostOp::add: return add(a, b, m);
    case HostOp::sub: return sub(a, b, m);
    case HostOp::mul: return mul(a, b, m);
    case HostOp::div: return div(a, b, m);
    case HostOp::sqrt: return ieee32::sqrt(a, m);
  }
  return kCanonicalNaN;
}

constexpr HostOp kBinaryOps[] = {HostOp::add, HostOp::sub, HostOp::mul, HostOp::div};
constexpr RoundingMode kModes[] = {RoundingMode::nearest_even, RoundingMode::toward_neg_inf,
                                   RoundingMode::toward_pos_inf};

}  // namespace

TEST(B32, Classification) {
  EXPECT_EQ(B32(0x00000000u).classify(), FpClass::zero);
  EXPECT_EQ(B32(0x80000000u).classify(), FpClass::zero);
  EXPECT_EQ(B32(0x00000001u).classify(), FpClass::subnormal);
  EXPECT_EQ(B32(0x007FFFFFu).classify(), FpClass::subnormal);
  EXPECT_EQ(B32(0x00800000u).classify(), FpClass::normal);
  EXPECT_EQ(B32(0x7F800000u).classify(), FpClass::infinite);
  EXPECT_EQ(B32(0x7F800001u).classify(), FpClass::nan);
  EXPECT_EQ(B32(0xFFC00000u).classify(), FpClass::nan);
}

TEST(B32, SpecExamples) {
  EXPECT_EQ(add(B32(0x3F800000u), B32(0x33800000u), RoundingMode::nearest_even), B32(0x3F800000u));
  EXPECT_EQ(add(kPosZero, kNegZero, RoundingMode::nearest_even), kPosZero);
  for (auto m : kModes) EXPECT_EQ(add(kPosInf, kNegInf, m), kCanonicalNaN);
  EXPECT_EQ(from_real(1.0 + std::ldexp(1.0, -24), RoundingMode::toward_pos_inf), B32(0x3F800001u));
  EXPECT_EQ(to_real(B32(0x00000001u)), std::ldexp(1.0, -149));
  EXPECT_EQ(to_real(B32(0x00000001u)), static_cast<double>(std::numeric_limits<float>::denorm_min()));
  EXPECT_EQ(from_real(0.0), kPosZero);
  EXPECT_EQ(ieee32::tanh(kPosZero), kPosZero);
  EXPECT_EQ(ieee32::exp(kPosInf), kPosInf);
  EXPECT_EQ(ieee32::tanh(f(0.5f)), f(static_cast<float>(std::tanh(0.5))));
}

TEST(B32, SignedZeroTables) {
  const B32 zs[] = {kPosZero, kNegZero};
  for (B32 a : zs) {
    for (B32 b : zs) {
      for (auto m : kModes) {
        for (auto op : kBinaryOps) {
          if (op == HostOp::div) continue;
          EXPECT_TRUE(same_value(kernel(op, a, b, m).bits(), host_op(op, hf(a), hf(b), m)))
              << "op " << int(op) << " " << format_b32_hex(a) << " " << format_b32_hex(b) << " mode " << to_string(m);
        }
      }
    }
  }
  // Exact cancellation: +0 except in toward -inf.
  EXPECT_EQ(sub(f(1.5f), f(1.5f), RoundingMode::nearest_even), kPosZero);
  EXPECT_EQ(sub(f(1.5f), f(1.5f), RoundingMode::toward_pos_inf), kPosZero);
  EXPECT_EQ(sub(f(1.5f), f(1.5f), RoundingMode::toward_neg_inf), kNegZero);
  EXPECT_EQ(mul(kNegZero, f(3.0f)), kNegZero);
  EXPECT_EQ(mul(kNegZero, f(-3.0f)), kPosZero);
  EXPECT_EQ(div(f(1.0f), kNegZero), kNegInf);
  EXPECT_EQ(div(kNegZero, kNegZero), kCanonicalNaN);
  EXPECT_EQ(ieee32::sqrt(kNegZero), kNegZero);
  EXPECT_EQ(ieee32::sqrt(f(-1.0f)), kCanonicalNaN);
  EXPECT_EQ(ieee32::sqrt(kNegInf), kCanonicalNaN);
  EXPECT_EQ(ieee32::sqrt(kPosInf), kPosInf);
}

TEST(B32, SubnormalBoundaries) {
  const B32 min_sub(0x00000001u), max_sub(0x007FFFFFu), min_norm(0x00800000u);
  EXPECT_EQ(add(max_sub, min_sub), min_norm);
  EXPECT_EQ(sub(min_norm, min_sub), max_sub);
  EXPECT_EQ(div(min_sub, f(2.0f)), kPosZero);  // tie to even (zero)
  EXPECT_EQ(div(B32(0x00000003u), f(2.0f)), B32(0x00000002u));  // 1.5 ulps -> 2
  EXPECT_EQ(div(min_sub, f(2.0f), RoundingMode::toward_pos_inf), min_sub);
  EXPECT_EQ(mul(min_norm, f(0.5f)), B32(0x00400000u));
  EXPECT_EQ(next_up(kNegZero), min_sub);
  EXPECT_EQ(next_down(kPosZero), B32(0x80000001u));
  const B32 probes[] = {min_sub, max_sub, min_norm, B32(0x00800001u), B32(0x80000001u), B32(0x807FFFFFu)};
  const B32 factors[] = {f(0.5f), f(2.0f), f(0.75f), f(1.5f), f(-3.0f), min_sub, max_sub, f(1e-10f), f(1e10f)};
  for (B32 a : probes) {
    for (B32 b : factors) {
      for (auto m : kModes) {
        for (auto op : kBinaryOps) {
          EXPECT_TRUE(same_value(kernel(op, a, b, m).bits(), host_op(op, hf(a), hf(b), m)));
          EXPECT_TRUE(same_value(kernel(op, b, a, m).bits(), host_op(op, hf(b), hf(a), m)));
        }
      }
    }
  }
}

TEST(B32, Overflow) {
  EXPECT_EQ(add(kMaxFinite, kMaxFinite), kPosInf);
  EXPECT_EQ(add(kMaxFinite, kMaxFinite, RoundingMode::toward_neg_inf), kMaxFinite);
  EXPECT_EQ(mul(neg(kMaxFinite), f(2.0f), RoundingMode::toward_pos_inf), neg(kMaxFinite));
  EXPECT_EQ(mul(neg(kMaxFinite), f(2.0f), RoundingMode::toward_neg_inf), kNegInf);
  // Half an ulp above max-finite rounds to infinity under nearest-even.
  EXPECT_EQ(from_real(3.4028235677973366e38), kPosInf);
  EXPECT_EQ(from_real(3.4028235677973362e38), kMaxFinite);
  EXPECT_EQ(from_real(1e300, RoundingMode::toward_neg_inf), kMaxFinite);
  EXPECT_EQ(from_real(-1e300, RoundingMode::toward_neg_inf), kNegInf);
}

TEST(B32, Ties) {
  // 1 + 2^-24 ties down (even), 1 + 3*2^-24 ties up.
  EXPECT_EQ(add(f(1.0f), f(0x1p-24f)), f(1.0f));
  EXPECT_EQ(add(f(1.0f), f(0x1.8p-23f)), f(1.0f + 0x1p-22f));
  EXPECT_EQ(add(f(-1.0f), f(-0x1p-24f)), f(-1.0f));
  EXPECT_EQ(add(f(1.0f), f(0x1p-24f), RoundingMode::toward_pos_inf), B32(0x3F800001u));
  EXPECT_EQ(add(f(1.0f), f(0x1p-24f), RoundingMode::toward_neg_inf), f(1.0f));
  // Just above the tie through a sticky bit.
  EXPECT_EQ(add(f(1.0f), f(0x1.000002p-24f)), B32(0x3F800001u));
  // Subtraction that borrows across the tie.
  EXPECT_EQ(sub(f(1.0f), f(0x1p-25f)), f(1.0f));
  EXPECT_EQ(sub(f(1.0f), f(0x1.000002p-25f)), B32(0x3F7FFFFFu));
}

TEST(B32, InfNanTables) {
  const B32 specials[] = {kPosInf, kNegInf, kCanonicalNaN, B32(0x7F800001u), B32(0xFFFFFFFFu),
                          kPosZero, kNegZero, f(1.0f), f(-2.5f), kMaxFinite, B32(0x00000001u)};
  for (B32 a : specials) {
    for (B32 b : specials) {
      for (auto m : kModes) {
        for (auto op : kBinaryOps) {
          const B32 r = kernel(op, a, b, m);
          EXPECT_TRUE(same_value(r.bits(), host_op(op, hf(a), hf(b), m)));
          if (r.is_nan()) {
            EXPECT_EQ(r, kCanonicalNaN);
          }
        }
      }
      const B32 mn = ieee32::min(a, b), mx = ieee32::max(a, b);
      if (a.is_nan() || b.is_nan()) {
        EXPECT_EQ(mn, kCanonicalNaN);
        EXPECT_EQ(mx, kCanonicalNaN);
      } else {
        EXPECT_TRUE(mn == a || mn == b);
        EXPECT_TRUE(mx == a || mx == b);
        EXPECT_TRUE(le(mn, mx));
      }
    }
  }
  EXPECT_EQ(ieee32::min(kPosZero, kNegZero), kNegZero);
  EXPECT_EQ(ieee32::max(kNegZero, kPosZero), kPosZero);
  EXPECT_EQ(neg(B32(0x7F800001u)), kCanonicalNaN);
  EXPECT_FALSE(lt(kCanonicalNaN, f(1.0f)));
  EXPECT_FALSE(le(kCanonicalNaN, kCanonicalNaN));
  EXPECT_TRUE(num_eq(kPosZero, kNegZero));
  EXPECT_THROW(to_real(kCanonicalNaN), DomainError);
  EXPECT_THROW(from_real(std::nan("")), DomainError);
}

TEST(B32, RandomConformanceAllModes) {
  std::mt19937_64 rng(101);
  for (auto op : kBinaryOps) {
    for (auto m : kModes) {
      for (int i = 0; i < 200000; ++i) {
        const B32 a(static_cast<std::uint32_t>(rng()));
        const B32 b(static_cast<std::uint32_t>(rng()));
        ASSERT_TRUE(same_value(kernel(op, a, b, m).bits(), host_op(op, hf(a), hf(b), m)))
            << "op " << int(op) << " " << format_b32_hex(a) << " " << format_b32_hex(b) << " " << to_string(m);
      }
    }
  }
}

TEST(B32, CloseExponentConformance) {
  // Uniform bit patterns rarely cancel; draw operands with nearby exponents.
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300000; ++i) {
    const auto base = static_cast<std::uint32_t>(rng());
    const auto delta = static_cast<std::uint32_t>(rng() % (1u << 26));
    const B32 a(base);
    const B32 b((base ^ 0x80000000u * (rng() & 1)) + delta - (1u << 25));
    for (auto m : kModes) {
      ASSERT_TRUE(same_value(add(a, b, m).bits(), host_op(HostOp::add, hf(a), hf(b), m)))
          << format_b32_hex(a) << " " << format_b32_hex(b) << " " << to_string(m);
      ASSERT_TRUE(same_value(sub(a, b, m).bits(), host_op(HostOp::sub, hf(a), hf(b), m)));
    }
  }
}

TEST(B32, SqrtConformance) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100000; ++i) {
    const B32 a(static_cast<std::uint32_t>(rng()));
    for (auto m : kModes) {
      ASSERT_TRUE(same_value(ieee32::sqrt(a, m).bits(), host_op(HostOp::sqrt, hf(a), 0.0f, m)))
          << format_b32_hex(a) << " " << to_string(m);
    }
  }
  for (std::uint32_t bits = 0; bits < 0x01000000u; bits += 97) {  // subnormal and low normal range
    ASSERT_TRUE(same_value(ieee32::sqrt(B32(bits)).bits(), host_op(HostOp::sqrt, hf(B32(bits)), 0.0f,
                                                                      RoundingMode::nearest_even)));
  }
}

TEST(B32, FromRealMatchesRoundingModel) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200000; ++i) {
    double x = std::bit_cast<double>(rng());
    if (std::isnan(x)) continue;
    if (i % 2) x = std::ldexp(std::fmod(x, 1.0), static_cast<int>(rng() % 320) - 170);
    for (auto m : kModes) {
      const B32 r = from_real(x, m);
      const double model = fp32_round(x, m);
      ASSERT_EQ(to_real(r), model) << x;
      ASSERT_EQ(r.sign(), std::signbit(model)) << x;
    }
  }
}

TEST(B32, DirectedBracketing) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100000; ++i) {
    const B32 a(static_cast<std::uint32_t>(rng()));
    const B32 b(static_cast<std::uint32_t>(rng()));
    for (auto op : kBinaryOps) {
      const B32 lo = kernel(op, a, b, RoundingMode::toward_neg_inf);
      const B32 mid = kernel(op, a, b, RoundingMode::nearest_even);
      const B32 hi = kernel(op, a, b, RoundingMode::toward_pos_inf);
      if (mid.is_nan()) continue;
      ASSERT_TRUE(le(lo, mid) && le(mid, hi));
    }
  }
}

TEST(B32, HexRoundTrip) {
  EXPECT_EQ(format_b32_hex(B32(0x3F800000u)), "0x3F800000");
  EXPECT_EQ(parse_b32_hex("0x3f800000"), B32(0x3F800000u));
  EXPECT_THROW(parse_b32_hex("0x3F8"), ParseError);
  std::mt19937 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const B32 v(rng());
    EXPECT_EQ(parse_b32_hex(format_b32_hex(v)), v);
  }
}

// ---------------------------------------------------------------------------
// Endpoint intervals

namespace {

B32Interval random_interval(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  double a = u(rng), b = u(rng);
  if (rng() % 8 == 0) a = 0.0;
  if (a > b) std::swap(a, b);
  return {from_real(a, RoundingMode::toward_neg_inf), from_real(b, RoundingMode::toward_pos_inf)};
}

B32 sample(const B32Interval& I, std::mt19937_64& rng) {
  const int k = static_cast<int>(rng() % 10);
  if (k == 0) return I.lo;
  if (k == 1) return I.hi;
  std::uniform_real_distribution<double> u(to_real(I.lo), to_real(I.hi));
  return from_real(u(rng));
}

void expect_encloses(const B32Interval& box, B32 r, const char* what) {
  if (r.is_nan()) {
    EXPECT_TRUE(box.is_entire()) << what;
  } else {
    EXPECT_TRUE(box.contains(r)) << what << " " << format_b32_hex(r) << " not in [" << format_b32_hex(box.lo)
                                 << ", " << format_b32_hex(box.hi) << "]";
  }
}

}  // namespace

TEST(B32Interval, SpecExamples) {
  const auto one = B32Interval::point(f(1.0f));
  const auto tiny = B32Interval::point(f(0x1p-24f));
  const auto s = b32i::add(one, tiny);
  EXPECT_EQ(s.lo, f(1.0f));
  EXPECT_EQ(s.hi, B32(0x3F800001u));
  EXPECT_TRUE(b32i::div(one, B32Interval::point(kNegZero)).is_entire());
  EXPECT_TRUE(b32i::div(one, B32Interval{f(-1.0f), f(2.0f)}).is_entire());
  const B32Interval I{f(-3.25f), f(7.5f)};
  EXPECT_EQ(b32i::mul(I, one), I);
  EXPECT_THROW((B32Interval{f(1.0f), f(0.0f)}), DomainError);
}

TEST(B32Interval, SoundnessSampling) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10000; ++t) {
    const auto I = random_interval(rng);
    const auto J = random_interval(rng);
    const auto add_box = b32i::add(I, J), sub_box = b32i::sub(I, J), mul_box = b32i::mul(I, J),
               div_box = b32i::div(I, J), min_box = b32i::min(I, J), max_box = b32i::max(I, J),
               sqr_box = b32i::sqr(I), abs_box = b32i::abs(I), neg_box = b32i::neg(I),
               sqrt_box = b32i::sqrt(I), exp_box = b32i::exp(I), tanh_box = b32i::tanh(I),
               sig_box = b32i::sigmoid(I);
    for (int k = 0; k < 100; ++k) {
      const B32 x = sample(I, rng), y = sample(J, rng);
      expect_encloses(add_box, add(x, y), "add");
      expect_encloses(sub_box, sub(x, y), "sub");
      expect_encloses(mul_box, mul(x, y), "mul");
      expect_encloses(div_box, div(x, y), "div");
      expect_encloses(min_box, ieee32::min(x, y), "min");
      expect_encloses(max_box, ieee32::max(x, y), "max");
      expect_encloses(sqr_box, mul(x, x), "sqr");
      expect_encloses(abs_box, ieee32::abs(x), "abs");
      expect_encloses(neg_box, neg(x), "neg");
      expect_encloses(sqrt_box, ieee32::sqrt(x), "sqrt");
      expect_encloses(exp_box, ieee32::exp(x), "exp");
      expect_encloses(tanh_box, ieee32::tanh(x), "tanh");
      expect_encloses(sig_box, ieee32::sigmoid(x), "sigmoid");
    }
    if (::testing::Test::HasFailure()) return;
  }
}

TEST(B32Interval, RealEnclosure) {
  // The directed endpoints also enclose the exact real result.
  std::mt19937_64 rng(29);
  for (int t = 0; t < 10000; ++t) {
    const auto I = random_interval(rng);
    const auto J = random_interval(rng);
    const double x = to_real(sample(I, rng)), y = to_real(sample(J, rng));
    EXPECT_TRUE(B32Intervals::contains(b32i::add(I, J), x + y));
    EXPECT_TRUE(B32Intervals::contains(b32i::mul(I, J), x * y));
    EXPECT_TRUE(B32Intervals::contains(b32i::tanh(I), std::tanh(x)));
    EXPECT_TRUE(B32Intervals::contains(b32i::exp(I), std::exp(x)));
  }
}

TEST(Ieee32Domain, ReluViaMax) {
  EXPECT_EQ(Ieee32Exec::max(kNegZero, Ieee32Exec::zero()), kPosZero);
  EXPECT_EQ(Ieee32Exec::max(f(-2.0f), Ieee32Exec::zero()), kPosZero);
  EXPECT_EQ(Ieee32Exec::max(kCanonicalNaN, Ieee32Exec::zero()), kCanonicalNaN);
  EXPECT_EQ(Ieee32Exec::from_double(0.1), f(0.1f));
  const auto box = B32Intervals::from_double(0.1);
  EXPECT_TRUE(B32Intervals::contains(box, 0.1));
  EXPECT_EQ(next_up(box.lo), box.hi);
}

TEST(NumericalStress, AddTieCollapsesUnderNearestEndpoints) {
  const double exact = 1.0 + std::ldexp(1.0, -24);
  const auto s = b32i::add(B32Interval::point(f(1.0f)), B32Interval::point(f(0x1p-24f)));
  EXPECT_TRUE(B32Intervals::contains(s, exact));
  const B32 naive = add(f(1.0f), f(0x1p-24f), RoundingMode::nearest_even);
  EXPECT_EQ(naive, f(1.0f));
  EXPECT_LT(to_real(naive), exact);
}

TEST(NumericalStress, DivisionBySignedZeroWidens) {
  const auto q = b32i::div(B32Interval::point(f(1.0f)), B32Interval::point(kNegZero));
  EXPECT_EQ(q.lo, kNegInf);
  EXPECT_EQ(q.hi, kPosInf);
  EXPECT_EQ(div(f(1.0f), kNegZero), kNegInf);
}

TEST(NumericalStress, QuadraticRangeEnclosed) {
  // p(x) = x^2 + 0.1x - 0.5 on [-0.5, 0.5]: min at x = -0.05, max at x = 0.5.
  auto p = [](const RealInterval& x) {
    const auto c = interval::div(RealInterval::point(1.0), RealInterval::point(10.0));
    return interval::sub(interval::add(interval::mul(x, x), interval::mul(c, x)), RealInterval::point(0.5));
  };
  const auto lo = p(interval::div(RealInterval::point(-1.0), RealInterval::point(20.0)));
  const auto hi = p(RealInterval::point(0.5));
  EXPECT_NEAR(lo.lo, -0.5025, 1e-15);
  EXPECT_NEAR(hi.hi, -0.2, 1e-15);
  const B32Interval X{f(-0.5f), f(0.5f)};
  const auto P = b32i::sub(b32i::add(b32i::sqr(X), b32i::mul(B32Intervals::from_double(0.1), X)),
                           B32Interval::point(f(0.5f)));
  EXPECT_LE(to_real(P.lo), lo.lo);
  EXPECT_GE(to_real(P.hi), hi.hi);
}
