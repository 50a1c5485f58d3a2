// SPDX-License-Identifier: Apache-2.0
//
// Directional first-derivative pass for graphs with one scalar input:
// every node carries a value box and a box for dv/dx.

#pragma once

#include <vector>

#include "nncert/bounds/ibp.hpp"

namespace nncert {

struct DerivBoxes {
  NodeValues<RealInterval> value;
  NodeValues<RealInterval> deriv;
};

/// Value and derivative enclosures over x in [lo, hi].
inline DerivBoxes deriv_ibp1(const WellTypedGraph& g, const ParamStore<double>& params, double lo, double hi) {
  using D = RealIntervals;
  if (g.inputs().size() != 1 || g.input_dim() != 1) throw TypingError("derivative pass needs a single scalar input");
  const auto& in = g.node(g.inputs()[0]);
  const InputRegion region{{Tensor<double>::filled(in.out_shape, lo), Tensor<double>::filled(in.out_shape, hi)}};
  DerivBoxes out;
  out.value = run_ibp<D>(g, params, region);
  auto& dv = out.deriv;
  dv.reserve(g.size());
  const RealInterval zero = D::zero();
  for (const Node& n : g.nodes()) {
    const auto size = n.out_shape.size();
    std::vector<RealInterval> d(size, zero);
    auto P = [&](std::size_t k) -> const Tensor<RealInterval>& { return dv[n.parents[k]]; };
    auto V = [&](std::size_t k) -> const Tensor<RealInterval>& { return out.value[n.parents[k]]; };
    const auto& y = out.value[n.id];
    switch (n.kind.tag()) {
      case OpTag::input: d.assign(size, D::one()); break;
      case OpTag::param: break;
      case OpTag::linear: {
        if (n.out_shape.rank() != 1) throw TypingError("derivative pass: batched linear is not supported");
        const auto& w = V(1);
        const auto& dx = P(0);
        const auto& l = n.kind.get<op::Linear>();
        for (std::size_t o = 0; o < l.out_dim; ++o) {
          std::vector<RealInterval> terms;
          for (std::size_t i = 0; i < l.in_dim; ++i) terms.push_back(D::mul(w[o * l.in_dim + i], dx[i]));
          d[o] = kernels::sum<D>(terms);
        }
        break;
      }
      case OpTag::add:
      case OpTag::sub:
        for (std::size_t i = 0; i < size; ++i) {
          d[i] = n.kind.tag() == OpTag::add ? D::add(P(0)[i], P(1)[i]) : D::sub(P(0)[i], P(1)[i]);
        }
        break;
      case OpTag::mul_elem:
        for (std::size_t i = 0; i < size; ++i) {
          d[i] = D::add(D::mul(P(0)[i], V(1)[i]), D::mul(V(0)[i], P(1)[i]));
        }
        break;
      case OpTag::tanh:
        for (std::size_t i = 0; i < size; ++i) {
          d[i] = D::mul(P(0)[i], D::sub(D::one(), D::sqr(y[i])));
        }
        break;
      case OpTag::sigmoid: {
        const RealInterval quarter = D::from_double(0.25), half = D::from_double(0.5);
        for (std::size_t i = 0; i < size; ++i) {
          d[i] = D::mul(P(0)[i], D::sub(quarter, D::sqr(D::sub(y[i], half))));
        }
        break;
      }
      case OpTag::exp:
        for (std::size_t i = 0; i < size; ++i) d[i] = D::mul(P(0)[i], y[i]);
        break;
      case OpTag::reduce_sum:
      case OpTag::reduce_mean: {
        d[0] = kernels::sum<D>(P(0).data());
        if (n.kind.tag() == OpTag::reduce_mean) {
          d[0] = D::div(d[0], D::from_double(static_cast<double>(P(0).size())));
        }
        break;
      }
      case OpTag::reshape:
      case OpTag::flatten: d.assign(P(0).data().begin(), P(0).data().end()); break;
      default:
        throw EvalError(n.id, std::string("derivative pass does not support ") + n.kind.name());
    }
    dv.emplace_back(n.out_shape, std::move(d));
  }
  return out;
}

}  // namespace nncert
