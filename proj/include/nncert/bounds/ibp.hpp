// SPDX-License-Identifier: Apache-2.0
//
// Interval bound propagation. Over an interval domain the evaluation
// kernels are already the transfer rules (affine ops split W into its
// positive and negative parts through interval products against point
// weights, monotone ops map endpoints); only softmax needs its own rule.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nncert/autograd/eval.hpp"
#include "nncert/ieee32/domain.hpp"

namespace nncert {

/// Axis-aligned box for one input node.
struct InputBox {
  Tensor<double> lo;
  Tensor<double> hi;
};

using InputRegion = std::vector<InputBox>;

/// Per-node interval enclosures over domain D.
template <IntervalDomain D>
using Boxes = NodeValues<typename D::value_type>;

namespace ibp_detail {

/// softmax_i = 1 / (1 + sum_{j != i} exp(x_j - x_i)), each difference an
/// interval of independent endpoints: monotone in every coordinate.
template <IntervalDomain D>
Tensor<typename D::value_type> softmax_monotone(const Tensor<typename D::value_type>& x, std::size_t axis) {
  using VT = typename D::value_type;
  const auto f = kernels::fibers(x.shape(), axis);
  std::vector<VT> y(x.size(), D::zero());
  const VT unit = D::from_bounds(0.0, 1.0);
  for (std::size_t o = 0; o < f.outer; ++o) {
    for (std::size_t i = 0; i < f.inner; ++i) {
      for (std::size_t j = 0; j < f.len; ++j) {
        const auto idx = f.at(o, j, i);
        VT rest = D::zero();
        for (std::size_t k = 0; k < f.len; ++k) {
          if (k != j) rest = D::add(rest, D::exp(D::sub(x[f.at(o, k, i)], x[idx])));
        }
        y[idx] = D::intersect(D::div(D::one(), D::add(D::one(), rest)), unit);
      }
    }
  }
  return Tensor<VT>(x.shape(), std::move(y));
}

}  // namespace ibp_detail

/// One IBP transfer step for a non-leaf node.
template <IntervalDomain D>
Tensor<typename D::value_type> ibp_step(const Node& n, std::span<const Tensor<typename D::value_type>* const> p) {
  using VT = typename D::value_type;
  if (n.kind.tag() != OpTag::softmax) return forward_node<D>(n, p);
  const auto axis = n.kind.get<op::Softmax>().axis;
  auto y = ibp_detail::softmax_monotone<D>(*p[0], axis);
  // Also enclose the max-shifted evaluation that point domains execute;
  // its rounding is not covered by the real-valued rule alone.
  const auto shifted = kernels::softmax<D>(*p[0], axis);
  const VT unit = D::from_bounds(0.0, 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = D::intersect(D::hull(y[i], shifted[i]), unit);
  return y;
}

/// Leaf boxes for an input region: inputs take the region, params are points.
template <IntervalDomain D>
Context<typename D::value_type> region_context(const WellTypedGraph& g, const ParamStore<double>& params,
                                               const InputRegion& region) {
  using VT = typename D::value_type;
  if (region.size() != g.inputs().size()) {
    throw TypingError("input region has " + std::to_string(region.size()) + " boxes, graph has " +
                      std::to_string(g.inputs().size()) + " inputs");
  }
  std::vector<Tensor<VT>> in;
  for (std::size_t k = 0; k < region.size(); ++k) {
    const auto& box = region[k];
    if (!(box.lo.shape() == box.hi.shape())) throw TypingError("input box lo/hi shapes differ");
    std::vector<VT> data;
    for (std::size_t i = 0; i < box.lo.size(); ++i) data.push_back(D::from_bounds(box.lo[i], box.hi[i]));
    in.emplace_back(box.lo.shape(), std::move(data));
  }
  const auto pconv = params.map([](const Tensor<double>& t) { return to_domain<D>(t); });
  return assemble_context<VT>(g, in, pconv);
}

/// Forward sweep of ibp_step in id order.
template <IntervalDomain D>
Boxes<D> run_ibp(const WellTypedGraph& g, const ParamStore<double>& params, const InputRegion& region) {
  using T = Tensor<typename D::value_type>;
  const auto ctx = region_context<D>(g, params, region);
  Boxes<D> boxes;
  boxes.reserve(g.size());
  std::size_t slot = 0;
  std::vector<const T*> ps;
  for (const Node& n : g.nodes()) {
    if (n.kind.tag() == OpTag::input || n.kind.tag() == OpTag::param) {
      boxes.push_back(ctx[slot++]);
      continue;
    }
    ps.clear();
    for (auto q : n.parents) ps.push_back(&boxes[q]);
    try {
      boxes.push_back(ibp_step<D>(n, ps));
    } catch (const DomainError& e) {
      throw EvalError(n.id, e.what());
    }
  }
  return boxes;
}

template <IntervalDomain D>
std::vector<double> lower_bounds(const Tensor<typename D::value_type>& t) {
  std::vector<double> out;
  for (const auto& v : t.data()) out.push_back(D::lower(v));
  return out;
}

template <IntervalDomain D>
std::vector<double> upper_bounds(const Tensor<typename D::value_type>& t) {
  std::vector<double> out;
  for (const auto& v : t.data()) out.push_back(D::upper(v));
  return out;
}

/// Flattened input box (concatenation of all input nodes in order).
inline std::pair<std::vector<double>, std::vector<double>> flat_region(const InputRegion& region) {
  std::vector<double> lo, hi;
  for (const auto& b : region) {
    lo.insert(lo.end(), b.lo.data().begin(), b.lo.data().end());
    hi.insert(hi.end(), b.hi.data().begin(), b.hi.data().end());
  }
  return {lo, hi};
}

}  // namespace nncert
