// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nncert/autograd/ad.hpp"
#include "nncert/bounds/crown.hpp"
#include "nncert/bounds/deriv.hpp"
#include "support/fixtures.hpp"
#include "support/random_graphs.hpp"

using namespace nncert;
namespace t = nncert::testing;

namespace {

InputBox box_of(Shape s, std::vector<double> lo, std::vector<double> hi) {
  return {Tensor<double>(s, std::move(lo)), Tensor<double>(std::move(s), std::move(hi))};
}

std::vector<double> flat_sample(const std::vector<Tensor<double>>& s) {
  std::vector<double> x;
  for (const auto& v : s) x.insert(x.end(), v.data().begin(), v.data().end());
  return x;
}

/// Rigorous enclosure of every node's exact value at a point.
NodeValues<RealInterval> exact_at(const t::RandomGraph& rg, const std::vector<Tensor<double>>& sample) {
  return eval_graph<RealIntervals>(rg.g, make_context<RealIntervals>(rg.g, sample, rg.params));
}

/// a.x + b at x with every rounding in one direction.
double form_at(const AffineForm& f, std::size_t r, std::span<const double> x, bool up) {
  double acc = f.bias[r];
  for (std::size_t j = 0; j < f.cols; ++j) {
    const double a = f.row(r)[j];
    if (a == 0.0) continue;
    acc = up ? directed::add_up(acc, directed::mul_up(a, x[j])) : directed::add_down(acc, directed::mul_down(a, x[j]));
  }
  return acc;
}

/// Interval enclosure of <c, y>.
RealInterval dot_enclosure(std::span<const double> c, const Tensor<RealInterval>& y) {
  RealInterval acc = RealInterval::point(0.0);
  for (std::size_t i = 0; i < c.size(); ++i) acc = interval::add(acc, interval::mul(RealInterval::point(c[i]), y[i]));
  return acc;
}

std::vector<double> random_objective(t::Rng& rng, std::size_t n) {
  std::vector<double> c(n);
  for (auto& v : c) v = t::grid(t::uniform(rng, -1.0, 1.0));
  return c;
}

/// Sub-box with endpoints on the binary32 grid.
InputRegion random_subbox(t::Rng& rng, const InputRegion& outer) {
  InputRegion r = outer;
  for (std::size_t k = 0; k < r.size(); ++k) {
    for (std::size_t i = 0; i < r[k].lo.size(); ++i) {
      const double a = t::uniform(rng, outer[k].lo[i], outer[k].hi[i]);
      const double b = t::uniform(rng, outer[k].lo[i], outer[k].hi[i]);
      const bool keep_lo = t::coin(rng, 0.2), keep_hi = t::coin(rng, 0.2);
      r[k].lo[i] = keep_lo ? outer[k].lo[i]
                           : std::max(outer[k].lo[i], fp32_round(std::min(a, b), RoundingMode::toward_neg_inf));
      r[k].hi[i] = keep_hi ? outer[k].hi[i]
                           : std::min(outer[k].hi[i], fp32_round(std::max(a, b), RoundingMode::toward_pos_inf));
      if (r[k].lo[i] > r[k].hi[i]) r[k].lo[i] = r[k].hi[i];
    }
  }
  return r;
}

/// Every node value of domain P at sampled points lies in the I boxes.
template <class I, class P>
::testing::AssertionResult ibp_encloses(const t::RandomGraph& rg, const InputRegion& region, t::Rng& rng,
                                        int samples) {
  const auto boxes = run_ibp<I>(rg.g, rg.params, region);
  for (int s = 0; s < samples; ++s) {
    const auto sample = t::sample_region(rng, region);
    const auto vals = eval_graph<P>(rg.g, make_context<P>(rg.g, sample, rg.params));
    for (std::size_t k = 0; k < vals.size(); ++k) {
      for (std::size_t i = 0; i < vals[k].size(); ++i) {
        const double v = P::to_double(vals[k][i]);
        const double lo = I::lower(boxes[k][i]), hi = I::upper(boxes[k][i]);
        if (!(lo <= v && v <= hi)) {
          return ::testing::AssertionFailure() << rg.g.node(k).kind.name() << " node " << k << "[" << i << "] value "
                                               << v << " outside [" << lo << ", " << hi << "]";
        }
      }
    }
  }
  return ::testing::AssertionSuccess();
}

/// W x + b for constant W, b over a [in] input.
t::Fixture affine_fixture(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b) {
  GraphBuilder gb;
  const auto x = gb.input(Shape::vec(in));
  const auto wn = gb.param("W", Shape::mat(out, in));
  const auto bn = gb.param("b", Shape::vec(out));
  gb.add(op::Linear{in, out}, {x, wn, bn});
  ParamStore<double> p;
  p.push("W", Tensor<double>(Shape::mat(out, in), std::move(w)));
  p.push("b", Tensor<double>(Shape::vec(out), std::move(b)));
  return {validate_graph(std::move(gb).build(), p), std::move(p), {}};
}

/// 2-2-1 relu network with one unit unstable on [-1, 1]^2.
t::Fixture small_mlp() {
  GraphBuilder gb;
  const auto x = gb.input(Shape::vec(2));
  const auto w1 = gb.param("W1", Shape::mat(2, 2));
  const auto b1 = gb.param("b1", Shape::vec(2));
  const auto w2 = gb.param("W2", Shape::mat(1, 2));
  const auto b2 = gb.param("b2", Shape::vec(1));
  const auto h = gb.add(op::Linear{2, 2}, {x, w1, b1});
  const auto r = gb.add(op::Relu{}, {h});
  gb.add(op::Linear{2, 1}, {r, w2, b2});
  ParamStore<double> p;
  p.push("W1", Tensor<double>(Shape::mat(2, 2), {1.0, -1.0, 0.5, 1.0}));
  p.push("b1", Tensor<double>(Shape::vec(2), {0.0, -0.25}));
  p.push("W2", Tensor<double>(Shape::mat(1, 2), {1.0, -2.0}));
  p.push("b2", Tensor<double>(Shape::vec(1), {0.375}));
  return {validate_graph(std::move(gb).build(), p), std::move(p), {}};
}

/// Corner enumeration of <c, y> for graphs whose output is affine in x.
std::pair<double, double> corner_min(const t::RandomGraph& rg, const InputRegion& region, std::span<const double> c) {
  const auto [lo, hi] = flat_region(region);
  const auto N = lo.size();
  double best_lo = std::numeric_limits<double>::infinity(), best_hi = best_lo;
  for (std::size_t mask = 0; mask < (std::size_t{1} << N); ++mask) {
    std::vector<Tensor<double>> sample;
    std::size_t j = 0;
    for (const auto& b : region) {
      std::vector<double> v(b.lo.size());
      for (auto& x : v) {
        x = (mask >> j & 1) ? hi[j] : lo[j];
        ++j;
      }
      sample.emplace_back(b.lo.shape(), std::move(v));
    }
    const auto e = dot_enclosure(c, exact_at(rg, sample)[rg.g.output_id()]);
    best_lo = std::min(best_lo, e.lo);
    best_hi = std::min(best_hi, e.hi);
  }
  return {best_lo, best_hi};
}

/// Forms-only lower bound of <c, y> (no box fallback).
double forms_lower(const NodeBounds& y, std::span<const double> c, const InputRegion& region) {
  const FlatBox box = FlatBox::from(region);
  AffineForm row = AffineForm::zeros(1, box.lo.size());
  AffineForm unused = row;
  for (std::size_t i = 0; i < c.size(); ++i) crown_detail::add_scaled(row, unused, 0, c[i], y, i, box);
  return crown_detail::concretize_lower(row.row(0), row.bias[0], row.err[0], box);
}

}  // namespace

// ---------------------------------------------------------------- IBP

TEST(Ibp, LinearExampleMatchesCornerEnumeration) {
  const auto f = affine_fixture(2, 1, {1.0, -2.0}, {0.5});
  const InputRegion region{box_of(Shape::vec(2), {0, 0}, {1, 1})};
  const auto boxes = run_ibp<RealIntervals>(f.g, f.params, region);
  const auto& y = boxes[f.g.output_id()][0];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double a : {0.0, 1.0}) {
    for (double b : {0.0, 1.0}) {
      lo = std::min(lo, a - 2 * b + 0.5);
      hi = std::max(hi, a - 2 * b + 0.5);
    }
  }
  EXPECT_EQ(y.lo, lo);
  EXPECT_EQ(y.hi, hi);
  EXPECT_EQ(y.lo, -1.5);
  EXPECT_EQ(y.hi, 1.5);
}

TEST(Ibp, ReluToyAndReshape) {
  const auto f = t::relu_toy();
  const InputRegion region{box_of(Shape::vec(2), {-1, -1}, {1, 1})};
  const auto boxes = run_ibp<RealIntervals>(f.g, f.params, region);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(boxes[0][i].lo, -1.0);
    EXPECT_EQ(boxes[0][i].hi, 1.0);
    EXPECT_EQ(boxes[1][i].lo, 0.0);
    EXPECT_EQ(boxes[1][i].hi, 1.0);
  }

  GraphBuilder gb;
  const auto x = gb.input(Shape::mat(2, 3));
  gb.add(op::Reshape{Shape::vec(6)}, {x});
  ParamStore<double> p;
  const auto g = validate_graph(std::move(gb).build(), p);
  const InputRegion r2{box_of(Shape::mat(2, 3), {-1, -2, -3, 0, 1, 2}, {1, 2, 3, 0.5, 1.5, 2.5})};
  const auto b2 = run_ibp<RealIntervals>(g, p, r2);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(b2[1][i].lo, r2[0].lo[i]);
    EXPECT_EQ(b2[1][i].hi, r2[0].hi[i]);
  }
}

TEST(Ibp, MlpBoxesContainSampledValues) {
  const auto f = small_mlp();
  const t::RandomGraph rg{f.g, f.params};
  const InputRegion region{box_of(Shape::vec(2), {-1, -1}, {1, 1})};
  t::Rng rng(11);
  EXPECT_TRUE((ibp_encloses<RealIntervals, RealRef>(rg, region, rng, 10000)));
}

TEST(Ibp, PointBoxContainsForwardTrace) {
  t::Rng rng(12);
  for (int n = 0; n < 200; ++n) {
    const auto rg = t::random_graph(rng);
    const auto x = t::sample_region(rng, t::random_region(rng, rg.g));
    InputRegion region;
    for (const auto& v : x) region.push_back({v, v});
    ASSERT_TRUE((ibp_encloses<RealIntervals, RealRef>(rg, region, rng, 1))) << "graph " << n;
  }
}

TEST(Ibp, SoundOnRandomGraphsRealBacking) {
  t::Rng rng(13);
  for (int n = 0; n < 1000; ++n) {
    const auto rg = t::random_graph(rng);
    const auto region = t::random_region(rng, rg.g);
    ASSERT_TRUE((ibp_encloses<RealIntervals, RealRef>(rg, region, rng, 100))) << "graph " << n;
  }
}

TEST(Ibp, SoundOnRandomGraphsB32Backing) {
  t::Rng rng(14);
  for (int n = 0; n < 1000; ++n) {
    const auto rg = t::random_graph(rng);
    const auto region = t::random_region(rng, rg.g);
    ASSERT_TRUE((ibp_encloses<B32Intervals, Ieee32Exec>(rg, region, rng, 100))) << "graph " << n;
  }
}

TEST(Ibp, ErrorsCarryNodeId) {
  const auto f = t::relu_toy();
  const InputRegion wrong{box_of(Shape::vec(3), {0, 0, 0}, {1, 1, 1})};
  EXPECT_THROW(run_ibp<RealIntervals>(f.g, f.params, wrong), Error);
  EXPECT_THROW(run_ibp<RealIntervals>(f.g, f.params, InputRegion{}), TypingError);
}

// ---------------------------------------------------------------- relaxations

TEST(Relax, ReluExamples) {
  const auto a = relu_relax(-1, 1, 0.3, 0);
  EXPECT_EQ(a.upper.slope, 0.5);
  EXPECT_EQ(a.upper.intercept, 0.5);
  EXPECT_EQ(a.lower.slope, 0.3);
  EXPECT_EQ(a.lower.intercept, 0.0);

  const auto b = relu_relax(-2, -1, 0.7, 0);
  EXPECT_EQ(b.lower, (Line{0, 0}));
  EXPECT_EQ(b.upper, (Line{0, 0}));

  EXPECT_THROW(relu_relax(-0.5, 1, 0.5, +1), PhaseError);

  const auto c = relu_relax(0.5, 2, 0.1, 0);
  EXPECT_EQ(c.lower, (Line{1, 0}));
  EXPECT_EQ(c.upper, (Line{1, 0}));
  EXPECT_THROW(relu_relax(1, 0, 0.5, 0), DomainError);
  EXPECT_THROW(relu_relax(-1, 1, 1.5, 0), DomainError);
}

TEST(Relax, PhaseConsistencyTable) {
  t::Rng rng(21);
  const double picks[] = {-2.0, -1.0, -0.0, 0.0, 0.5, 3.0};
  int rejected = 0, total = 0;
  auto check = [&](double l, double u, int beta) {
    const bool excluded = (beta == -1 && !(u <= 0)) || (beta == 1 && !(0 <= l));
    bool threw = false;
    try {
      relu_relax(l, u, 0.5, beta);
    } catch (const PhaseError&) {
      threw = true;
    }
    ++total;
    rejected += threw;
    EXPECT_EQ(threw, excluded) << "l=" << l << " u=" << u << " beta=" << beta;
  };
  for (double l : picks) {
    for (double u : picks) {
      if (l > u) continue;
      for (int beta : {-1, 0, 1}) check(l, u, beta);
    }
  }
  for (int n = 0; n < 10000; ++n) {
    double l = t::uniform(rng, -3, 3), u = t::uniform(rng, -3, 3);
    if (l > u) std::swap(l, u);
    check(l, u, static_cast<int>(t::pick(rng, 0, 2)) - 1);
  }
  EXPECT_GT(rejected, 0);
  EXPECT_LT(rejected, total);
}

TEST(Relax, ReluSoundness) {
  t::Rng rng(22);
  for (int n = 0; n < 20000; ++n) {
    const double l = t::uniform(rng, -10, 10);
    const double u = l + std::ldexp(t::uniform(rng, 0.0, 1.0), static_cast<int>(t::pick(rng, 0, 40)) - 30);
    const double alpha = t::coin(rng, 0.2) ? static_cast<double>(t::pick(rng, 0, 1)) : t::uniform(rng, 0, 1);
    const auto lp = relu_relax(l, u, alpha, 0);
    for (int s = 0; s < 100; ++s) {
      const double z = s == 0 ? l : s == 1 ? u : t::uniform(rng, l, u);
      const double r = std::max(z, 0.0);
      ASSERT_LE(lp.lower.at(z), r) << "l=" << l << " u=" << u << " z=" << z;
      ASSERT_GE(lp.upper.at(z), r) << "l=" << l << " u=" << u << " z=" << z;
    }
  }
}

TEST(Relax, SmoothSoundness) {
  t::Rng rng(23);
  struct Fn {
    OpTag tag;
    double (*f)(double);
    double range;
  };
  const Fn fns[] = {{OpTag::tanh, [](double z) { return std::tanh(z); }, 8.0},
                    {OpTag::sigmoid, [](double z) { return 1.0 / (1.0 + std::exp(-z)); }, 12.0},
                    {OpTag::exp, [](double z) { return std::exp(z); }, 6.0}};
  for (const auto& fn : fns) {
    for (int n = 0; n < 20000; ++n) {
      const double l = t::uniform(rng, -fn.range, fn.range);
      const double u = t::coin(rng, 0.05) ? l : l + t::uniform(rng, 0.0, t::coin(rng, 0.5) ? 1e-3 : fn.range);
      const auto lp = smooth_relax(fn.tag, l, u);
      for (int s = 0; s < 100; ++s) {
        const double z = s == 0 ? l : s == 1 ? u : t::uniform(rng, l, u);
        const double v = fn.f(z);
        ASSERT_LE(lp.lower.at(z), v) << op_name(fn.tag) << " l=" << l << " u=" << u << " z=" << z;
        ASSERT_GE(lp.upper.at(z), v) << op_name(fn.tag) << " l=" << l << " u=" << u << " z=" << z;
      }
    }
  }
}

TEST(Relax, TanhExamples) {
  const auto p = tanh_relax(0, 0);
  EXPECT_EQ(p.lower.slope, 0.0);
  EXPECT_EQ(p.upper.slope, 0.0);
  EXPECT_LE(p.lower.at(0), 0.0);
  EXPECT_GE(p.upper.at(0), 0.0);
  EXPECT_NEAR(p.lower.at(0), 0.0, 1e-300);
  EXPECT_NEAR(p.upper.at(0), 0.0, 1e-300);

  // Concave piece: the lower line is the secant through both endpoints.
  const auto q = tanh_relax(1, 2);
  const double t1 = std::tanh(1.0), t2 = std::tanh(2.0);
  EXPECT_NEAR(q.lower.slope, t2 - t1, 1e-15);
  EXPECT_NEAR(q.lower.at(1), t1, 1e-13);
  EXPECT_NEAR(q.lower.at(2), t2, 1e-13);
  t::Rng rng(24);
  for (int s = 0; s < 1000; ++s) {
    const double z = t::uniform(rng, 1, 2);
    EXPECT_LE(q.lower.at(z), std::tanh(z));
    EXPECT_GE(q.upper.at(z), std::tanh(z));
  }

  const auto r = tanh_relax(-1, 1);
  EXPECT_EQ(r.lower.slope, 0.0);
  EXPECT_EQ(r.upper.slope, 0.0);
  EXPECT_NEAR(r.lower.intercept, std::tanh(-1.0), 1e-15);
  EXPECT_NEAR(r.upper.intercept, std::tanh(1.0), 1e-15);
  EXPECT_LE(r.lower.intercept, std::tanh(-1.0));
  EXPECT_GE(r.upper.intercept, std::tanh(1.0));
}

TEST(Relax, LinesNestOnSubIntervals) {
  // Lines for [l', u'] inside [l, u] lie between the outer lines on [l', u'].
  t::Rng rng(25);
  for (OpTag tag : {OpTag::tanh, OpTag::sigmoid, OpTag::exp, OpTag::relu}) {
    for (int n = 0; n < 20000; ++n) {
      double l = t::uniform(rng, -4, 4), u = t::uniform(rng, -4, 4);
      if (l > u) std::swap(l, u);
      double a = t::uniform(rng, l, u), b = t::uniform(rng, l, u);
      if (a > b) std::swap(a, b);
      const auto outer = tag == OpTag::relu ? relu_relax(l, u, 0.5, 0) : smooth_relax(tag, l, u);
      const auto inner = tag == OpTag::relu ? relu_relax(a, b, 0.5, 0) : smooth_relax(tag, a, b);
      for (double z : {a, b, 0.5 * (a + b)}) {
        // Both sides carry their own outward margins of a few ulps.
        const double slack = 64 * std::numeric_limits<double>::epsilon() * (1 + std::fabs(outer.upper.at(z)));
        ASSERT_GE(inner.lower.at(z), outer.lower.at(z) - slack) << op_name(tag) << " " << l << " " << u << " " << a << " " << b;
        ASSERT_LE(inner.upper.at(z), outer.upper.at(z) + slack) << op_name(tag) << " " << l << " " << u << " " << a << " " << b;
      }
    }
  }
}

// ---------------------------------------------------------------- CROWN

TEST(Crown, FormsBracketSampledValues) {
  t::Rng rng(31);
  for (int n = 0; n < 400; ++n) {
    const auto rg = t::random_graph(rng);
    const auto region = t::random_region(rng, rg.g);
    const auto fwd = crown_forward(rg.g, rg.params, region);
    for (int s = 0; s < 50; ++s) {
      const auto sample = t::sample_region(rng, region);
      const auto x = flat_sample(sample);
      const auto exact = exact_at(rg, sample);
      for (std::size_t k = 0; k < fwd.size(); ++k) {
        const auto& b = fwd[k];
        for (std::size_t r = 0; r < b.lo.size(); ++r) {
          const auto& e = exact[k][r];
          ASSERT_LE(b.lo[r], e.hi) << "graph " << n << " node " << k;
          ASSERT_GE(b.hi[r], e.lo) << "graph " << n << " node " << k;
          const double lv = directed::sub_down(form_at(b.lower, r, x, false), b.lower.err[r]);
          const double uv = directed::add_up(form_at(b.upper, r, x, true), b.upper.err[r]);
          ASSERT_LE(lv, e.hi) << "graph " << n << " node " << k << " " << rg.g.node(k).kind.name();
          ASSERT_GE(uv, e.lo) << "graph " << n << " node " << k << " " << rg.g.node(k).kind.name();
        }
      }
    }
  }
}

TEST(Crown, AffineGraphsAreExact) {
  t::Rng rng(32);
  int tested = 0;
  while (tested < 200) {
    t::GenOptions opt{t::GraphFamily::affine};
    opt.max_width = 4;
    const auto rg = t::random_graph(rng, opt);
    if (rg.g.input_dim() > 10) continue;
    ++tested;
    const auto region = t::random_region(rng, rg.g);
    const auto c = random_objective(rng, rg.g.output().out_shape.size());
    const auto [exact_lo, exact_hi] = corner_min(rg, region, c);
    const double bwd = crown_backward(rg.g, rg.params, region, c);
    const double tol = 1e-9 * (1 + std::fabs(exact_lo));
    EXPECT_LE(bwd, exact_hi) << "graph " << tested;
    EXPECT_GE(bwd, exact_lo - tol) << "graph " << tested;

    // The forward box of every output coordinate is its exact range.
    const auto fwd = crown_forward(rg.g, rg.params, region);
    const auto& y = fwd[rg.g.output_id()];
    for (std::size_t r = 0; r < y.lo.size(); ++r) {
      std::vector<double> e(y.lo.size(), 0.0);
      e[r] = 1.0;
      const auto [mlo, mhi] = corner_min(rg, region, e);
      e[r] = -1.0;
      const auto [nlo, nhi] = corner_min(rg, region, e);
      EXPECT_LE(y.lo[r], mhi);
      EXPECT_GE(y.lo[r], mlo - 1e-9 * (1 + std::fabs(mlo)));
      EXPECT_GE(y.hi[r], -nhi);
      EXPECT_LE(y.hi[r], -nlo + 1e-9 * (1 + std::fabs(nlo)));
    }
  }
}

TEST(Crown, BackwardExamples) {
  const auto f = affine_fixture(2, 1, {1.0, 1.0}, {0.0});
  const InputRegion region{box_of(Shape::vec(2), {0, 0}, {1, 1})};
  const std::vector<double> one{1.0}, zero{0.0};
  const double b = crown_backward(f.g, f.params, region, one);
  EXPECT_LE(b, 0.0);
  EXPECT_NEAR(b, 0.0, 1e-12);
  EXPECT_EQ(crown_backward(f.g, f.params, region, zero), 0.0);
}

TEST(Crown, ReluChainBelowSampledMinimum) {
  const auto f = small_mlp();
  const InputRegion region{box_of(Shape::vec(2), {-1, -1}, {1, 1})};
  const std::vector<double> c{1.0};
  const auto pre = run_ibp<RealIntervals>(f.g, f.params, region)[5];
  bool unstable = false;
  for (const auto& v : pre.data()) unstable = unstable || (v.lo < 0 && v.hi > 0);
  ASSERT_TRUE(unstable);

  const double bound = crown_backward(f.g, f.params, region, c);
  const auto fwd = crown_forward(f.g, f.params, region);
  const double fbound = objective_lower_bound(fwd.back(), c, FlatBox::from(region));
  t::Rng rng(33);
  double min_seen = std::numeric_limits<double>::infinity();
  const t::RandomGraph rg{f.g, f.params};
  for (int s = 0; s < 10000; ++s) {
    const auto sample = t::sample_region(rng, region);
    min_seen = std::min(min_seen, exact_at(rg, sample).back()[0].hi);
  }
  EXPECT_LE(bound, min_seen);
  EXPECT_LE(fbound, min_seen);
  EXPECT_GT(bound, -1e3);
}

TEST(Crown, BackwardSoundOnRandomGraphs) {
  t::Rng rng(34);
  for (int n = 0; n < 300; ++n) {
    const auto rg = t::random_graph(rng);
    const auto region = t::random_region(rng, rg.g);
    const auto c = random_objective(rng, rg.g.output().out_shape.size());
    const auto fwd = crown_forward(rg.g, rg.params, region);
    const double b_ibp = crown_backward(rg.g, rg.params, region, c);
    const double b_fwd = crown_backward(rg.g, rg.params, region, c, {}, box_list(fwd));
    const double f_obj = objective_lower_bound(fwd[rg.g.output_id()], c, FlatBox::from(region));
    for (int s = 0; s < 50; ++s) {
      const auto sample = t::sample_region(rng, region);
      const double v = dot_enclosure(c, exact_at(rg, sample)[rg.g.output_id()]).hi;
      ASSERT_LE(b_ibp, v) << "graph " << n;
      ASSERT_LE(b_fwd, v) << "graph " << n;
      ASSERT_LE(f_obj, v) << "graph " << n;
    }
  }
}

TEST(Crown, BackwardDominatesForwardOnChains) {
  // Same relaxation lines on both sides: the backward pass is given the
  // ranges the forward pass chose its lines on. The tolerance covers the two
  // passes' independent rounding-error terms.
  t::Rng rng(35);
  int strictly_better = 0;
  for (int n = 0; n < 400; ++n) {
    t::GenOptions opt{t::GraphFamily::chain};
    const auto rg = t::random_graph(rng, opt);
    const auto region = t::random_region(rng, rg.g, 1.0);
    const auto c = random_objective(rng, rg.g.output().out_shape.size());
    const auto fwd = crown_forward(rg.g, rg.params, region);
    const double fwd_bound = forms_lower(fwd[rg.g.output_id()], c, region);
    const double bwd = crown_backward(rg.g, rg.params, region, c, {}, form_box_list(fwd, region));
    ASSERT_GE(bwd, fwd_bound - 1e-9 * (1 + std::fabs(fwd_bound))) << "graph " << n;
    strictly_better += bwd > fwd_bound + 1e-9;
  }
  EXPECT_GT(strictly_better, 0);
}

TEST(Crown, AlphaZeroGivesZeroLowerLines) {
  const auto f = t::relu_toy();
  const InputRegion region{box_of(Shape::vec(2), {-1, -0.5}, {1, 2})};
  RelaxParams relax;
  relax.alpha[1] = {0.0, 0.0};
  const auto fwd = crown_forward(f.g, f.params, region, relax);
  const auto& low = fwd[1].lower;
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(low.bias[r], 0.0);
    for (std::size_t j = 0; j < low.cols; ++j) EXPECT_EQ(low.row(r)[j], 0.0);
  }
  relax.alpha[1] = {1.0, 1.0};
  const auto fwd1 = crown_forward(f.g, f.params, region, relax);
  EXPECT_EQ(fwd1[1].lower.row(0)[0], 1.0);
  EXPECT_EQ(fwd1[1].lower.row(1)[1], 1.0);
}

TEST(Crown, PhaseErrorsFromBeta) {
  const auto f = t::relu_toy();
  const InputRegion region{box_of(Shape::vec(2), {-1, -1}, {1, 1})};
  RelaxParams relax;
  relax.beta[1] = {1, 0};
  EXPECT_THROW(crown_forward(f.g, f.params, region, relax), PhaseError);
  relax.beta[1] = {0, -1};
  EXPECT_THROW(crown_forward(f.g, f.params, region, relax), PhaseError);
  relax.beta[1] = {0, 0};
  EXPECT_NO_THROW(crown_forward(f.g, f.params, region, relax));
}

TEST(Bounds, MonotoneTighteningOnNestedBoxes) {
  t::Rng rng(36);
  for (int n = 0; n < 1000; ++n) {
    const auto rg = t::random_graph(rng, {n % 4 == 0 ? t::GraphFamily::chain : t::GraphFamily::general});
    const auto outer = t::random_region(rng, rg.g, 0.8);
    const auto inner = random_subbox(rng, outer);
    const auto io = ibp_box_list(rg.g, rg.params, outer), ii = ibp_box_list(rg.g, rg.params, inner);
    const auto co = crown_forward(rg.g, rg.params, outer), ci = crown_forward(rg.g, rg.params, inner);
    const auto bo = run_ibp<B32Intervals>(rg.g, rg.params, outer), bi = run_ibp<B32Intervals>(rg.g, rg.params, inner);
    for (std::size_t k = 0; k < io.size(); ++k) {
      for (std::size_t r = 0; r < io[k].first.size(); ++r) {
        ASSERT_GE(ii[k].first[r], io[k].first[r]) << "ibp graph " << n << " node " << k;
        ASSERT_LE(ii[k].second[r], io[k].second[r]) << "ibp graph " << n << " node " << k;
        ASSERT_GE(B32Intervals::lower(bi[k][r]), B32Intervals::lower(bo[k][r])) << "b32 graph " << n << " node " << k;
        ASSERT_LE(B32Intervals::upper(bi[k][r]), B32Intervals::upper(bo[k][r])) << "b32 graph " << n << " node " << k;
        ASSERT_GE(ci[k].lo[r], co[k].lo[r]) << "crown graph " << n << " node " << k << " " << rg.g.node(k).kind.name()
                                            << std::hexfloat << " " << ci[k].lo[r] << " " << co[k].lo[r];
        ASSERT_LE(ci[k].hi[r], co[k].hi[r]) << "crown graph " << n << " node " << k << " " << rg.g.node(k).kind.name()
                                            << std::hexfloat << " " << ci[k].hi[r] << " " << co[k].hi[r];
      }
    }
  }
}

TEST(Crown, BoxesNoLooserThanIbp) {
  t::Rng rng(37);
  for (int n = 0; n < 300; ++n) {
    const auto rg = t::random_graph(rng);
    const auto region = t::random_region(rng, rg.g);
    const auto ibp = ibp_box_list(rg.g, rg.params, region);
    const auto fwd = crown_forward(rg.g, rg.params, region);
    for (std::size_t k = 0; k < fwd.size(); ++k) {
      for (std::size_t r = 0; r < fwd[k].lo.size(); ++r) {
        ASSERT_GE(fwd[k].lo[r], ibp[k].first[r]);
        ASSERT_LE(fwd[k].hi[r], ibp[k].second[r]);
      }
    }
  }
}

// ---------------------------------------------------------------- derivative pass

TEST(Deriv, Examples) {
  const auto lin = affine_fixture(1, 1, {2.0}, {0.0});
  const auto d = deriv_ibp1(lin.g, lin.params, -1, 1);
  EXPECT_EQ(d.deriv.back()[0].lo, 2.0);
  EXPECT_EQ(d.deriv.back()[0].hi, 2.0);

  GraphBuilder gb;
  const auto x = gb.input(Shape::vec(1));
  gb.add(op::Tanh{}, {x});
  ParamStore<double> p;
  const auto g = validate_graph(std::move(gb).build(), p);
  const auto dt = deriv_ibp1(g, p, 0, 0);
  EXPECT_LE(dt.deriv.back()[0].lo, 1.0);
  EXPECT_EQ(dt.deriv.back()[0].hi, 1.0);
  EXPECT_GE(dt.deriv.back()[0].lo, 1.0 - 1e-15);
}

TEST(Deriv, TanhTwoXContainsSampledDerivative) {
  GraphBuilder gb;
  const auto x = gb.input(Shape::vec(1));
  const auto w = gb.param("w", Shape::mat(1, 1));
  const auto b = gb.param("b", Shape::vec(1));
  const auto h = gb.add(op::Linear{1, 1}, {x, w, b});
  gb.add(op::Tanh{}, {h});
  ParamStore<double> p;
  p.push("w", Tensor<double>(Shape::mat(1, 1), {2.0}));
  p.push("b", Tensor<double>(Shape::vec(1), {0.0}));
  const auto g = validate_graph(std::move(gb).build(), p);
  const auto d = deriv_ibp1(g, p, -0.3, 0.3).deriv.back()[0];
  t::Rng rng(41);
  for (int s = 0; s < 1000; ++s) {
    const double z = t::uniform(rng, -0.3, 0.3);
    const double th = std::tanh(2 * z);
    const double v = 2 * (1 - th * th);
    EXPECT_LE(d.lo, v);
    EXPECT_GE(d.hi, v);
  }
  EXPECT_LE(d.hi, 2.0 + 1e-12);
  EXPECT_GE(d.lo, 2 * (1 - std::pow(std::tanh(0.6), 2)) - 1e-3);
}

TEST(Deriv, RandomSmoothGraphsEncloseJvp) {
  t::Rng rng(42);
  for (int n = 0; n < 300; ++n) {
    t::GenOptions opt{t::GraphFamily::smooth_scalar};
    opt.max_depth = 5;
    opt.max_width = 4;
    const auto rg = t::random_graph(rng, opt);
    const double c = t::uniform(rng, -1, 1), r = t::uniform(rng, 0.0, 0.4);
    const double lo = fp32_round(c - r, RoundingMode::toward_neg_inf), hi = fp32_round(c + r, RoundingMode::toward_pos_inf);
    const auto d = deriv_ibp1(rg.g, rg.params, lo, hi);
    const auto& out = d.deriv[rg.g.output_id()];
    for (int s = 0; s < 30; ++s) {
      const double z = std::clamp(t::grid(t::uniform(rng, lo, hi)), lo, hi);
      const std::vector<Tensor<double>> in{Tensor<double>(Shape::vec(1), {z})};
      const auto ctx = make_context<RealIntervals>(rg.g, in, rg.params);
      auto dctx = ctx;
      for (auto& tns : dctx) tns = Tensor<RealInterval>::filled(tns.shape(), RealInterval::point(0.0));
      dctx[0] = Tensor<RealInterval>::filled(dctx[0].shape(), RealInterval::point(1.0));
      const auto tan = jvp<RealIntervals>(rg.g, ctx, dctx);
      for (std::size_t i = 0; i < out.size(); ++i) {
        ASSERT_LE(out[i].lo, tan[i].hi) << "graph " << n;
        ASSERT_GE(out[i].hi, tan[i].lo) << "graph " << n;
      }
    }
  }
}

TEST(Deriv, UnsupportedOpThrows) {
  GraphBuilder gb;
  const auto x = gb.input(Shape::vec(1));
  gb.add(op::Relu{}, {x});
  ParamStore<double> p;
  const auto g = validate_graph(std::move(gb).build(), p);
  EXPECT_THROW(deriv_ibp1(g, p, -1, 1), EvalError);
  EXPECT_THROW(deriv_ibp1(t::relu_toy().g, p, -1, 1), TypingError);
}
