// SPDX-License-Identifier: Apache-2.0
//
// Scalar domains. A domain is a stateless type exposing `value_type` and
// static operations; graph evaluation, AD and bound propagation are
// templated on it, so one graph runs under reference reals, the
// round-on-R binary32 model, the bit-level kernel, or intervals.

#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>

#include "nncert/core/error.hpp"
#include "nncert/scalars/real_interval.hpp"
#include "nncert/scalars/rounding.hpp"

namespace nncert {

template <class D>
concept ScalarDomain = requires(const typename D::value_type& a, const typename D::value_type& b, double d) {
  { D::name() } -> std::convertible_to<const char*>;
  { D::zero() } -> std::same_as<typename D::value_type>;
  { D::one() } -> std::same_as<typename D::value_type>;
  { D::from_double(d) } -> std::same_as<typename D::value_type>;
  { D::to_double(a) } -> std::convertible_to<double>;
  { D::add(a, b) } -> std::same_as<typename D::value_type>;
  { D::sub(a, b) } -> std::same_as<typename D::value_type>;
  { D::mul(a, b) } -> std::same_as<typename D::value_type>;
  { D::div(a, b) } -> std::same_as<typename D::value_type>;
  { D::neg(a) } -> std::same_as<typename D::value_type>;
  { D::abs(a) } -> std::same_as<typename D::value_type>;
  { D::min(a, b) } -> std::same_as<typename D::value_type>;
  { D::max(a, b) } -> std::same_as<typename D::value_type>;
  { D::sqr(a) } -> std::same_as<typename D::value_type>;
  { D::lt(a, b) } -> std::same_as<bool>;
  { D::le(a, b) } -> std::same_as<bool>;
  { D::exp(a) } -> std::same_as<typename D::value_type>;
  { D::tanh(a) } -> std::same_as<typename D::value_type>;
  { D::sigmoid(a) } -> std::same_as<typename D::value_type>;
  { D::sqrt(a) } -> std::same_as<typename D::value_type>;
};

/// Interval domains additionally expose their endpoints and set operations.
template <class D>
concept IntervalDomain = ScalarDomain<D> && requires(const typename D::value_type& a, double d) {
  { D::lower(a) } -> std::convertible_to<double>;
  { D::upper(a) } -> std::convertible_to<double>;
  { D::from_bounds(d, d) } -> std::same_as<typename D::value_type>;
  { D::hull(a, a) } -> std::same_as<typename D::value_type>;
  { D::intersect(a, a) } -> std::same_as<typename D::value_type>;
};

/// binary64 as the executable stand-in for the reals.
struct RealRef {
  using value_type = double;
  static const char* name() { return "real"; }
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static double from_double(double x) { return x; }
  static double to_double(double x) { return x; }
  static double add(double a, double b) { return a + b; }
  static double sub(double a, double b) { return a - b; }
  static double mul(double a, double b) { return a * b; }
  static double div(double a, double b) { return a / b; }
  static double neg(double a) { return -a; }
  static double abs(double a) { return std::fabs(a); }
  static double min(double a, double b) { return b < a ? b : a; }
  static double max(double a, double b) { return a < b ? b : a; }
  static double sqr(double a) { return a * a; }
  static bool lt(double a, double b) { return a < b; }
  static bool le(double a, double b) { return a <= b; }
  static double exp(double a) { return std::exp(a); }
  static double tanh(double a) { return std::tanh(a); }
  static double sigmoid(double a) { return interval::sigmoid_scalar(a); }
  static double sqrt(double a) { return std::sqrt(a); }
};

/// Round-on-R binary32 proof model: compute in binary64, round to nearest
/// binary32. Finite-only: overflow or NaN is a DomainError.
struct Fp32Rounded {
  using value_type = double;
  static const char* name() { return "fp32"; }

  static double round(double x) {
    if (std::isnan(x)) throw DomainError("fp32: NaN result");
    const double r = fp32_round(x, RoundingMode::nearest_even);
    if (std::isinf(r)) throw DomainError("fp32: overflow");
    return r;
  }

  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static double from_double(double x) { return round(x); }
  static double to_double(double x) { return x; }
  static double add(double a, double b) { return round(a + b); }
  static double sub(double a, double b) { return round(a - b); }
  static double mul(double a, double b) { return round(a * b); }
  static double div(double a, double b) {
    if (b == 0.0) throw DomainError("fp32: division by zero");
    return round(a / b);
  }
  static double neg(double a) { return -a; }
  static double abs(double a) { return std::fabs(a); }
  static double min(double a, double b) { return b < a ? b : a; }
  static double max(double a, double b) { return a < b ? b : a; }
  static double sqr(double a) { return round(a * a); }
  static bool lt(double a, double b) { return a < b; }
  static bool le(double a, double b) { return a <= b; }
  static double exp(double a) { return round(std::exp(a)); }
  static double tanh(double a) { return round(std::tanh(a)); }
  static double sigmoid(double a) { return round(interval::sigmoid_scalar(a)); }
  static double sqrt(double a) {
    if (a < 0) throw DomainError("fp32: sqrt of negative");
    return round(std::sqrt(a));
  }
};

/// Outward-rounded binary64 intervals.
struct RealIntervals {
  using value_type = RealInterval;
  static const char* name() { return "real-interval"; }
  static RealInterval zero() { return RealInterval::point(0.0); }
  static RealInterval one() { return RealInterval::point(1.0); }
  static RealInterval from_double(double x) { return RealInterval::point(x); }
  static RealInterval from_bounds(double lo, double hi) { return {lo, hi}; }
  static double to_double(const RealInterval& a) { return 0.5 * (a.lo + a.hi); }
  static double lower(const RealInterval& a) { return a.lo; }
  static double upper(const RealInterval& a) { return a.hi; }
  static RealInterval add(const RealInterval& a, const RealInterval& b) { return interval::add(a, b); }
  static RealInterval sub(const RealInterval& a, const RealInterval& b) { return interval::sub(a, b); }
  static RealInterval mul(const RealInterval& a, const RealInterval& b) { return interval::mul(a, b); }
  static RealInterval div(const RealInterval& a, const RealInterval& b) { return interval::div(a, b); }
  static RealInterval neg(const RealInterval& a) { return interval::neg(a); }
  static RealInterval abs(const RealInterval& a) { return interval::abs(a); }
  static RealInterval min(const RealInterval& a, const RealInterval& b) { return interval::min(a, b); }
  static RealInterval max(const RealInterval& a, const RealInterval& b) { return interval::max(a, b); }
  static RealInterval sqr(const RealInterval& a) { return interval::sqr(a); }
  /// Certainly-less: every point of a is below every point of b.
  static bool lt(const RealInterval& a, const RealInterval& b) { return a.hi < b.lo; }
  static bool le(const RealInterval& a, const RealInterval& b) { return a.hi <= b.lo; }
  static RealInterval exp(const RealInterval& a) { return interval::exp(a); }
  static RealInterval tanh(const RealInterval& a) { return interval::tanh(a); }
  static RealInterval sigmoid(const RealInterval& a) { return interval::sigmoid(a); }
  static RealInterval sqrt(const RealInterval& a) { return interval::sqrt(a); }
  static RealInterval hull(const RealInterval& a, const RealInterval& b) { return interval::hull(a, b); }
  static RealInterval intersect(const RealInterval& a, const RealInterval& b) { return interval::intersect(a, b); }
  static bool contains(const RealInterval& a, double x) { return a.contains(x); }
};

static_assert(ScalarDomain<RealRef>);
static_assert(ScalarDomain<Fp32Rounded>);
static_assert(IntervalDomain<RealIntervals>);

/// Primitive scalar operations addressable by tag.
enum class ScalarOp { add, sub, mul, div, neg, abs, min, max, sqr, exp, tanh, sigmoid, sqrt };

inline std::size_t arity(ScalarOp op) {
  switch (op) {
    case ScalarOp::add:
    case ScalarOp::sub:
    case ScalarOp::mul:
    case ScalarOp::div:
    case ScalarOp::min:
    case ScalarOp::max: return 2;
    default: return 1;
  }
}

/// Dispatches one scalar primitive in domain D.
template <ScalarDomain D>
typename D::value_type domain_eval(ScalarOp op, std::span<const typename D::value_type> args) {
  if (args.size() != arity(op)) {
    throw DomainError("domain_eval: expected " + std::to_string(arity(op)) + " operands, got " +
                      std::to_string(args.size()));
  }
  switch (op) {
    case ScalarOp::add: return D::add(args[0], args[1]);
    case ScalarOp::sub: return D::sub(args[0], args[1]);
    case ScalarOp::mul: return D::mul(args[0], args[1]);
    case ScalarOp::div: return D::div(args[0], args[1]);
    case ScalarOp::min: return D::min(args[0], args[1]);
    case ScalarOp::max: return D::max(args[0], args[1]);
    case ScalarOp::neg: return D::neg(args[0]);
    case ScalarOp::abs: return D::abs(args[0]);
    case ScalarOp::sqr: return D::sqr(args[0]);
    case ScalarOp::exp: return D::exp(args[0]);
    case ScalarOp::tanh: return D::tanh(args[0]);
    case ScalarOp::sigmoid: return D::sigmoid(args[0]);
    case ScalarOp::sqrt: return D::sqrt(args[0]);
  }
  throw DomainError("domain_eval: unknown op");
}

}  // namespace nncert
