// SPDX-License-Identifier: Apache-2.0
//
// Affine bound propagation over the flattened graph input x in R^N.
//
// Forward mode keeps, per node, a lower and an upper affine form in x and a
// concretized box; nonlinearities are replaced by their relaxation lines on
// the range of the pre-activation forms. Backward mode substitutes a fixed
// objective c through the graph, choosing lines by the sign of each
// coefficient.
//
// Forms are composed in binary64. Each form row carries a bound on its
// accumulated rounding error over the input box, so a computed form minus
// (plus) its error is a sound lower (upper) bound in exact arithmetic.
// The backward pass accumulates the local rounding of every stored
// multiplier weighted by the magnitude bound of the node it multiplies.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "nncert/bounds/ibp.hpp"
#include "nncert/bounds/relax.hpp"

namespace nncert {

/// Twice the binary64 unit roundoff: one rounding error per stored value
/// with headroom for second-order terms and the error arithmetic itself.
inline constexpr double kRound = 0x1p-52;

/// rows x cols coefficient matrix (row-major) plus a bias per row.
struct AffineForm {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> coeffs;
  std::vector<double> bias;
  /// Per row: bound on |computed - exact| over the input box.
  std::vector<double> err;

  static AffineForm zeros(std::size_t r, std::size_t c) {
    return {r, c, std::vector<double>(r * c, 0.0), std::vector<double>(r, 0.0), std::vector<double>(r, 0.0)};
  }

  static AffineForm constant(std::span<const double> values, std::size_t c) {
    AffineForm f = zeros(values.size(), c);
    f.bias.assign(values.begin(), values.end());
    return f;
  }

  double* row(std::size_t r) { return coeffs.data() + r * cols; }
  const double* row(std::size_t r) const { return coeffs.data() + r * cols; }

  /// a_r . x + b_r at a point (binary64, no directed rounding).
  double eval(std::size_t r, std::span<const double> x) const {
    double acc = bias[r];
    for (std::size_t j = 0; j < cols; ++j) acc += row(r)[j] * x[j];
    return acc;
  }

  friend bool operator==(const AffineForm&, const AffineForm&) = default;
};

/// Per-node result of affine propagation.
struct NodeBounds {
  std::vector<double> lo;
  std::vector<double> hi;
  AffineForm lower;
  AffineForm upper;
  bool input_dependent = false;
};

/// Per relu node: one alpha and one beta per unit. Missing entries use
/// kDefaultAlpha and beta = 0.
struct RelaxParams {
  std::map<std::size_t, std::vector<double>> alpha;
  std::map<std::size_t, std::vector<int>> beta;
};

/// Input box in flattened coordinates.
struct FlatBox {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> mag;  // max(|lo|, |hi|)

  static FlatBox from(const InputRegion& region) {
    auto [l, h] = flat_region(region);
    std::vector<double> m(l.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = std::max(std::fabs(l[j]), std::fabs(h[j]));
    return {std::move(l), std::move(h), std::move(m)};
  }
};

namespace crown_detail {

inline bool is_leaf(const Node& n) { return n.kind.tag() == OpTag::input || n.kind.tag() == OpTag::param; }

/// Sound lower bound of a.x + b - err over the box.
inline double concretize_lower(const double* a, double b, double err, const FlatBox& box) {
  double acc = b;
  for (std::size_t j = 0; j < box.lo.size(); ++j) {
    if (a[j] == 0.0) continue;
    acc = directed::add_down(acc, directed::mul_down(a[j], a[j] > 0 ? box.lo[j] : box.hi[j]));
  }
  return directed::sub_down(acc, err);
}

inline double concretize_upper(const double* a, double b, double err, const FlatBox& box) {
  double acc = b;
  for (std::size_t j = 0; j < box.lo.size(); ++j) {
    if (a[j] == 0.0) continue;
    acc = directed::add_up(acc, directed::mul_up(a[j], a[j] > 0 ? box.hi[j] : box.lo[j]));
  }
  return directed::add_up(acc, err);
}

/// dst_row += w * src_row (bias included); skipped when w == 0. The error
/// bound takes |w| times the source error plus the local roundings.
inline void axpy(AffineForm& dst, std::size_t dr, double w, const AffineForm& src, std::size_t sr,
                 const FlatBox& box) {
  if (w == 0.0) return;
  double* d = dst.row(dr);
  const double* s = src.row(sr);
  double local = 0.0;
  for (std::size_t j = 0; j < dst.cols; ++j) {
    if (s[j] == 0.0) continue;
    const double p = w * s[j];
    d[j] += p;
    local += (std::fabs(p) + std::fabs(d[j])) * box.mag[j];
  }
  const double p = w * src.bias[sr];
  dst.bias[dr] += p;
  local += std::fabs(p) + std::fabs(dst.bias[dr]);
  dst.err[dr] += std::fabs(w) * src.err[sr] + kRound * local;
}

/// bias_row += v with its rounding.
inline void add_bias(AffineForm& f, std::size_t r, double v) {
  if (v == 0.0) return;
  f.bias[r] += v;
  f.err[r] += kRound * std::fabs(f.bias[r]);
}

/// Accumulates w * v into the lower (or upper) form where v is bracketed
/// by [L, U]: nonnegative weights take the same side, negative the other.
inline void add_scaled(AffineForm& lower, AffineForm& upper, std::size_t dr, double w, const NodeBounds& src,
                       std::size_t sr, const FlatBox& box) {
  if (w >= 0) {
    axpy(lower, dr, w, src.lower, sr, box);
    axpy(upper, dr, w, src.upper, sr, box);
  } else {
    axpy(lower, dr, w, src.upper, sr, box);
    axpy(upper, dr, w, src.lower, sr, box);
  }
}

/// [min L_r, max U_r] over the box.
inline std::pair<double, double> form_range(const NodeBounds& b, std::size_t r, const FlatBox& box) {
  return {concretize_lower(b.lower.row(r), b.lower.bias[r], b.lower.err[r], box),
          concretize_upper(b.upper.row(r), b.upper.bias[r], b.upper.err[r], box)};
}

inline NodeBounds ibp_constant(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t cols) {
  return {lo, hi, AffineForm::constant(lo, cols), AffineForm::constant(hi, cols), true};
}

inline Tensor<RealInterval> box_tensor(const Shape& s, const NodeBounds& b) {
  std::vector<RealInterval> v;
  v.reserve(b.lo.size());
  for (std::size_t i = 0; i < b.lo.size(); ++i) v.emplace_back(b.lo[i], b.hi[i]);
  return {s, std::move(v)};
}

}  // namespace crown_detail

/// Relaxation lines for unit i of a relu/tanh/sigmoid/exp node whose
/// pre-activation lies in [l, u].
inline LinePair unit_relaxation(const Node& n, std::size_t i, double l, double u, const RelaxParams& relax) {
  if (n.kind.tag() != OpTag::relu) return smooth_relax(n.kind.tag(), l, u);
  double alpha = kDefaultAlpha;
  int beta = 0;
  if (auto it = relax.alpha.find(n.id); it != relax.alpha.end()) {
    if (it->second.size() != n.out_shape.size()) throw DomainError("alpha length mismatch at node " + std::to_string(n.id));
    alpha = it->second[i];
  }
  if (auto it = relax.beta.find(n.id); it != relax.beta.end()) {
    if (it->second.size() != n.out_shape.size()) throw DomainError("beta length mismatch at node " + std::to_string(n.id));
    beta = it->second[i];
  }
  return relu_relax(l, u, alpha, beta);
}

namespace crown_detail {

inline constexpr int kSnapBits = 36;

/// Rounds x outward to the grid of spacing 2^(e - kSnapBits), where 2^e
/// bounds scale. Bounds on nested boxes that agree in exact arithmetic can
/// differ in the last bits through their rounding-error terms; the grid
/// absorbs that. The node's IBP magnitude is the scale: it only shrinks on
/// nested boxes, so the grids only refine.
inline double snap(double x, bool up, double scale) {
  if (!std::isfinite(x)) return x;
  if (!std::isfinite(scale) || scale == 0.0) scale = std::fabs(x);
  if (scale == 0.0) return x;
  int e = 0;
  std::frexp(scale, &e);
  if (e - kSnapBits < -1000) return x;
  const double k = std::ldexp(x, kSnapBits - e);
  if (std::fabs(k) >= 0x1p52) return x;
  return std::ldexp(up ? std::ceil(k) : std::floor(k), e - kSnapBits);
}

}  // namespace crown_detail

/// Concretizes forms over the input box and intersects with ibp_box.
inline void concretize_into(NodeBounds& b, const Tensor<RealInterval>& ibp_box, const FlatBox& box) {
  const auto rows = b.lower.rows;
  b.lo.resize(rows);
  b.hi.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double lo = crown_detail::concretize_lower(b.lower.row(r), b.lower.bias[r], b.lower.err[r], box);
    double hi = crown_detail::concretize_upper(b.upper.row(r), b.upper.bias[r], b.upper.err[r], box);
    const double scale = std::max(std::fabs(ibp_box[r].lo), std::fabs(ibp_box[r].hi));
    lo = std::max(crown_detail::snap(lo, false, scale), ibp_box[r].lo);
    hi = std::min(crown_detail::snap(hi, true, scale), ibp_box[r].hi);
    if (!(lo <= hi)) {  // both sides are enclosures; disagreement is rounding noise
      lo = ibp_box[r].lo;
      hi = ibp_box[r].hi;
    }
    b.lo[r] = lo;
    b.hi[r] = hi;
  }
}

namespace crown_detail {

/// A node whose value is a known point (constant with a degenerate box).
inline bool is_point(const NodeBounds& b) {
  if (b.input_dependent) return false;
  for (std::size_t i = 0; i < b.lo.size(); ++i) {
    if (b.lo[i] != b.hi[i]) return false;
  }
  return true;
}

}  // namespace crown_detail

/// Bounds of a leaf: inputs get identity forms over their slice of the
/// flattened input, params are points.
inline NodeBounds leaf_bounds(const WellTypedGraph& g, const Node& n, const ParamStore<double>& params,
                              const InputRegion& region, const FlatBox& box) {
  const auto N = box.lo.size();
  if (n.kind.tag() == OpTag::param) {
    const auto& t = params.at(n.kind.get<op::Param>().key);
    std::vector<double> v(t.data().begin(), t.data().end());
    return {v, v, AffineForm::constant(v, N), AffineForm::constant(v, N), false};
  }
  const auto inputs = g.inputs();
  const auto k = static_cast<std::size_t>(std::find(inputs.begin(), inputs.end(), n.id) - inputs.begin());
  const auto off = g.input_offset(k);
  const auto& ib = region.at(k);
  NodeBounds b;
  b.lo.assign(ib.lo.data().begin(), ib.lo.data().end());
  b.hi.assign(ib.hi.data().begin(), ib.hi.data().end());
  b.lower = AffineForm::zeros(b.lo.size(), N);
  for (std::size_t i = 0; i < b.lo.size(); ++i) b.lower.row(i)[off + i] = 1.0;
  b.upper = b.lower;
  b.input_dependent = true;
  return b;
}

/// IBP transfer of a node from its parents' current boxes.
inline Tensor<RealInterval> ibp_from_bounds(const WellTypedGraph& g, const Node& n, const std::vector<NodeBounds>& all) {
  std::vector<Tensor<RealInterval>> boxes;
  boxes.reserve(n.parents.size());
  for (auto q : n.parents) boxes.push_back(crown_detail::box_tensor(g.node(q).out_shape, all[q]));
  std::vector<const Tensor<RealInterval>*> ptrs;
  for (const auto& b : boxes) ptrs.push_back(&b);
  return ibp_step<RealIntervals>(n, ptrs);
}

/// One forward step for a non-leaf node given all earlier nodes' bounds.
inline NodeBounds crown_step(const WellTypedGraph& g, const Node& n, const std::vector<NodeBounds>& all,
                             const FlatBox& box, const RelaxParams& relax) {
  using namespace crown_detail;
  const auto N = box.lo.size();
  const auto size = n.out_shape.size();
  const auto ibp_box = ibp_from_bounds(g, n, all);

  NodeBounds out;
  for (auto q : n.parents) out.input_dependent = out.input_dependent || all[q].input_dependent;
  out.lower = AffineForm::zeros(size, N);
  out.upper = AffineForm::zeros(size, N);

  auto P = [&](std::size_t k) -> const NodeBounds& { return all[n.parents[k]]; };
  const auto tag = n.kind.tag();
  bool fallback = !out.input_dependent;
  for (auto q : n.parents) {
    for (std::size_t i = 0; i < all[q].lo.size() && !fallback; ++i) {
      fallback = !std::isfinite(all[q].lo[i]) || !std::isfinite(all[q].hi[i]);
    }
  }
  if (!fallback) {
    switch (tag) {
      case OpTag::linear: {
        const NodeBounds& x = P(0);
        const NodeBounds& w = P(1);
        const NodeBounds& b = P(2);
        if (!is_point(w) || !is_point(b)) {
          fallback = true;
          break;
        }
        const auto outd = b.lo.size();
        const auto in = w.lo.size() / outd;
        const auto rows = x.lo.size() / in;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const auto dr = r * outd + o;
            for (std::size_t i = 0; i < in; ++i) add_scaled(out.lower, out.upper, dr, w.lo[o * in + i], x, r * in + i, box);
            add_bias(out.lower, dr, b.lo[o]);
            add_bias(out.upper, dr, b.lo[o]);
          }
        }
        break;
      }
      case OpTag::matmul: {
        const NodeBounds& a = P(0);
        const NodeBounds& bm = P(1);
        const bool b_const = is_point(bm);
        if (!b_const && !is_point(a)) {
          fallback = true;
          break;
        }
        const auto m = n.out_shape[0];
        const auto cols = n.out_shape.rank() == 1 ? std::size_t{1} : n.out_shape[1];
        const auto k = a.lo.size() / m;
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            for (std::size_t i = 0; i < k; ++i) {
              if (b_const) add_scaled(out.lower, out.upper, r * cols + c, bm.lo[i * cols + c], a, r * k + i, box);
              else add_scaled(out.lower, out.upper, r * cols + c, a.lo[r * k + i], bm, i * cols + c, box);
            }
          }
        }
        break;
      }
      case OpTag::add:
      case OpTag::sub:
        for (std::size_t i = 0; i < size; ++i) {
          add_scaled(out.lower, out.upper, i, 1.0, P(0), i, box);
          add_scaled(out.lower, out.upper, i, tag == OpTag::add ? 1.0 : -1.0, P(1), i, box);
        }
        break;
      case OpTag::mul_elem: {
        const bool a_const = is_point(P(0));
        if (!a_const && !is_point(P(1))) {
          fallback = true;
          break;
        }
        const NodeBounds& cst = a_const ? P(0) : P(1);
        const NodeBounds& var = a_const ? P(1) : P(0);
        for (std::size_t i = 0; i < size; ++i) add_scaled(out.lower, out.upper, i, cst.lo[i], var, i, box);
        break;
      }
      case OpTag::relu:
      case OpTag::tanh:
      case OpTag::sigmoid:
      case OpTag::exp: {
        // Lines are chosen on the range of the parent's forms rather than
        // its clipped box: the forms' values stay inside it, which keeps
        // results on nested input boxes nested.
        const NodeBounds& x = P(0);
        std::vector<std::pair<double, double>> range(size);
        for (std::size_t i = 0; i < size && !fallback; ++i) {
          range[i] = form_range(x, i, box);
          fallback = !std::isfinite(range[i].first) || !std::isfinite(range[i].second);
        }
        if (fallback) break;
        for (std::size_t i = 0; i < size; ++i) {
          const LinePair lp = unit_relaxation(n, i, range[i].first, range[i].second, relax);
          // A nonnegative slope keeps the side of the form; a negative one
          // swaps it.
          axpy(out.lower, i, lp.lower.slope, lp.lower.slope >= 0 ? x.lower : x.upper, i, box);
          add_bias(out.lower, i, lp.lower.intercept);
          axpy(out.upper, i, lp.upper.slope, lp.upper.slope >= 0 ? x.upper : x.lower, i, box);
          add_bias(out.upper, i, lp.upper.intercept);
        }
        break;
      }
      case OpTag::reduce_sum:
      case OpTag::reduce_mean: {
        const NodeBounds& x = P(0);
        const double w = tag == OpTag::reduce_mean ? 1.0 / static_cast<double>(x.lo.size()) : 1.0;
        for (std::size_t i = 0; i < x.lo.size(); ++i) add_scaled(out.lower, out.upper, 0, w, x, i, box);
        break;
      }
      case OpTag::reshape:
      case OpTag::flatten:
        out.lower = P(0).lower;
        out.upper = P(0).upper;
        break;
      default: fallback = true;  // softmax, mse_loss
    }
  }
  if (fallback) {
    std::vector<double> lo, hi;
    for (const auto& v : ibp_box.data()) {
      lo.push_back(v.lo);
      hi.push_back(v.hi);
    }
    out.lower = AffineForm::constant(lo, N);
    out.upper = AffineForm::constant(hi, N);
  }
  concretize_into(out, ibp_box, box);
  return out;
}

/// Forward affine propagation over all nodes.
inline std::vector<NodeBounds> crown_forward(const WellTypedGraph& g, const ParamStore<double>& params,
                                             const InputRegion& region, const RelaxParams& relax = {}) {
  const FlatBox box = FlatBox::from(region);
  if (box.lo.size() != g.input_dim()) throw TypingError("input region does not match graph inputs");
  std::vector<NodeBounds> all;
  all.reserve(g.size());
  for (const Node& n : g.nodes()) {
    if (crown_detail::is_leaf(n)) {
      all.push_back(leaf_bounds(g, n, params, region, box));
    } else {
      try {
        all.push_back(crown_step(g, n, all, box, relax));
      } catch (const DomainError& e) {
        throw EvalError(n.id, e.what());
      }
    }
  }
  return all;
}

/// Lower bound of <c, y> over the box from a node's forms: the objective
/// row c.L (with sides picked by sign) concretized, or c against the box,
/// whichever is larger.
inline double objective_lower_bound(const NodeBounds& y, std::span<const double> c, const FlatBox& box) {
  if (c.size() != y.lo.size()) throw TypingError("objective length does not match output size");
  const auto N = box.lo.size();
  AffineForm row = AffineForm::zeros(1, N);
  AffineForm unused = AffineForm::zeros(1, N);
  for (std::size_t i = 0; i < c.size(); ++i) crown_detail::add_scaled(row, unused, 0, c[i], y, i, box);
  const double from_forms = crown_detail::concretize_lower(row.row(0), row.bias[0], row.err[0], box);
  double from_box = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    from_box = directed::add_down(from_box, directed::mul_down(c[i], c[i] > 0 ? y.lo[i] : y.hi[i]));
  }
  return std::max(from_forms, from_box);
}

/// Per-node boxes used for relaxations and fallbacks in the backward pass.
using BoxList = std::vector<std::pair<std::vector<double>, std::vector<double>>>;

inline BoxList ibp_box_list(const WellTypedGraph& g, const ParamStore<double>& params, const InputRegion& region) {
  const auto boxes = run_ibp<RealIntervals>(g, params, region);
  BoxList out;
  for (const auto& t : boxes) out.emplace_back(lower_bounds<RealIntervals>(t), upper_bounds<RealIntervals>(t));
  return out;
}

inline BoxList box_list(const std::vector<NodeBounds>& fwd) {
  BoxList out;
  for (const auto& b : fwd) out.emplace_back(b.lo, b.hi);
  return out;
}

/// Per-node ranges of the forward forms: the intervals crown_step picks
/// relaxation lines on. The backward pass given these uses the same lines.
inline BoxList form_box_list(const std::vector<NodeBounds>& fwd, const InputRegion& region) {
  const FlatBox box = FlatBox::from(region);
  BoxList out;
  for (const auto& b : fwd) {
    std::vector<double> lo(b.lower.rows), hi(b.lower.rows);
    for (std::size_t r = 0; r < lo.size(); ++r) std::tie(lo[r], hi[r]) = crown_detail::form_range(b, r, box);
    out.emplace_back(std::move(lo), std::move(hi));
  }
  return out;
}

/// Objective-dependent backward pass: a lower bound on min <c, y(x)> over
/// the region. Intermediate boxes come from IBP unless given.
inline double crown_backward(const WellTypedGraph& g, const ParamStore<double>& params, const InputRegion& region,
                             std::span<const double> c, const RelaxParams& relax = {},
                             const std::optional<BoxList>& boxes_override = std::nullopt) {
  const FlatBox box = FlatBox::from(region);
  if (box.lo.size() != g.input_dim()) throw TypingError("input region does not match graph inputs");
  if (c.size() != g.output().out_shape.size()) throw TypingError("objective length does not match output size");
  const BoxList boxes = boxes_override ? *boxes_override : ibp_box_list(g, params, region);
  if (boxes.size() != g.size()) throw TypingError("box list does not cover the graph");

  auto point = [&](std::size_t id) {
    const auto& [lo, hi] = boxes[id];
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (lo[i] != hi[i]) return false;
    }
    return true;
  };

  std::vector<std::vector<double>> lam(g.size());
  for (const Node& n : g.nodes()) lam[n.id].assign(n.out_shape.size(), 0.0);
  lam[g.output_id()].assign(c.begin(), c.end());
  // mag[id][i] bounds |v_i| of node id over the region.
  std::vector<std::vector<double>> mag(g.size());
  for (std::size_t id = 0; id < g.size(); ++id) {
    const auto& [lo, hi] = boxes[id];
    mag[id].resize(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) mag[id][i] = std::max(std::fabs(lo[i]), std::fabs(hi[i]));
  }
  double acc = 0.0;
  double err = 0.0;
  auto add_const = [&](double v) {
    acc += v;
    err += kRound * (std::fabs(v) + std::fabs(acc));
  };
  // lam[p][j] += t, charging the rounding against |v_{p,j}|.
  auto push = [&](std::size_t p, std::size_t j, double t) {
    if (t == 0.0) return;
    lam[p][j] += t;
    err += kRound * (std::fabs(t) + std::fabs(lam[p][j])) * mag[p][j];
  };
  // lambda . v >= sum of lambda_i times the matching box endpoint
  auto use_box = [&](std::size_t id) {
    const auto& [lo, hi] = boxes[id];
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double l = lam[id][i];
      if (l == 0.0) continue;
      add_const(l > 0 ? directed::mul_down(l, lo[i]) : directed::mul_down(l, hi[i]));
    }
  };

  for (std::size_t id = g.size(); id-- > 0;) {
    const Node& n = g.node(id);
    auto& L = lam[id];
    if (std::all_of(L.begin(), L.end(), [](double v) { return v == 0.0; })) continue;
    const auto tag = n.kind.tag();
    const auto& P = n.parents;
    switch (tag) {
      case OpTag::input: break;  // concretized below
      case OpTag::param: {
        const auto& t = params.at(n.kind.get<op::Param>().key);
        for (std::size_t i = 0; i < L.size(); ++i) {
          if (L[i] != 0.0) add_const(L[i] * t[i]);
        }
        break;
      }
      case OpTag::linear: {
        if (!point(P[1]) || !point(P[2])) {
          use_box(id);
          break;
        }
        const auto& w = boxes[P[1]].first;
        const auto& b = boxes[P[2]].first;
        const auto outd = b.size();
        const auto in = w.size() / outd;
        const auto rows = L.size() / outd;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const double l = L[r * outd + o];
            if (l == 0.0) continue;
            add_const(l * b[o]);
            for (std::size_t i = 0; i < in; ++i) push(P[0], r * in + i, w[o * in + i] * l);
          }
        }
        break;
      }
      case OpTag::matmul: {
        const bool b_const = point(P[1]);
        if (!b_const && !point(P[0])) {
          use_box(id);
          break;
        }
        const auto m = n.out_shape[0];
        const auto cols = n.out_shape.rank() == 1 ? std::size_t{1} : n.out_shape[1];
        const auto k = lam[P[0]].size() / m;
        const auto& a = boxes[P[0]].first;
        const auto& bm = boxes[P[1]].first;
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t cc = 0; cc < cols; ++cc) {
            const double l = L[r * cols + cc];
            if (l == 0.0) continue;
            for (std::size_t i = 0; i < k; ++i) {
              if (b_const) push(P[0], r * k + i, l * bm[i * cols + cc]);
              else push(P[1], i * cols + cc, a[r * k + i] * l);
            }
          }
        }
        break;
      }
      case OpTag::add:
      case OpTag::sub:
        for (std::size_t i = 0; i < L.size(); ++i) {
          push(P[0], i, L[i]);
          push(P[1], i, tag == OpTag::add ? L[i] : -L[i]);
        }
        break;
      case OpTag::mul_elem: {
        const bool a_const = point(P[0]);
        if (!a_const && !point(P[1])) {
          use_box(id);
          break;
        }
        const auto& cst = boxes[a_const ? P[0] : P[1]].first;
        const auto dst = a_const ? P[1] : P[0];
        for (std::size_t i = 0; i < L.size(); ++i) push(dst, i, L[i] * cst[i]);
        break;
      }
      case OpTag::relu:
      case OpTag::tanh:
      case OpTag::sigmoid:
      case OpTag::exp: {
        const auto& [plo, phi] = boxes[P[0]];
        const auto& [slo, shi] = boxes[id];
        for (std::size_t i = 0; i < L.size(); ++i) {
          if (L[i] == 0.0) continue;
          if (!std::isfinite(plo[i]) || !std::isfinite(phi[i])) {
            add_const(L[i] > 0 ? directed::mul_down(L[i], slo[i]) : directed::mul_down(L[i], shi[i]));
            continue;
          }
          const LinePair lp = unit_relaxation(n, i, plo[i], phi[i], relax);
          const Line& line = L[i] > 0 ? lp.lower : lp.upper;
          push(P[0], i, L[i] * line.slope);
          if (line.intercept != 0.0) add_const(L[i] * line.intercept);
        }
        break;
      }
      case OpTag::reduce_sum:
      case OpTag::reduce_mean: {
        const auto n_in = lam[P[0]].size();
        const double w = tag == OpTag::reduce_mean ? L[0] / static_cast<double>(n_in) : L[0];
        for (std::size_t i = 0; i < n_in; ++i) push(P[0], i, w);
        break;
      }
      case OpTag::reshape:
      case OpTag::flatten:
        for (std::size_t i = 0; i < L.size(); ++i) push(P[0], i, L[i]);
        break;
      default: use_box(id);  // softmax, mse_loss
    }
  }

  const auto inputs = g.inputs();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto off = g.input_offset(k);
    const auto& L = lam[inputs[k]];
    for (std::size_t i = 0; i < L.size(); ++i) {
      if (L[i] == 0.0) continue;
      add_const(L[i] > 0 ? directed::mul_down(L[i], box.lo[off + i]) : directed::mul_down(L[i], box.hi[off + i]));
    }
  }
  return directed::sub_down(acc, err * (1.0 + 0x1p-40));
}

}  // namespace nncert
