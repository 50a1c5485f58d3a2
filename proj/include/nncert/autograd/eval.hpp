// SPDX-License-Identifier: Apache-2.0
//
// Forward evaluation of a well-typed graph over any scalar domain. The same
// per-node kernels serve reference reals, the binary32 models and interval
// domains (where they act as the interval transfer rules).

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nncert/core/error.hpp"
#include "nncert/core/graph.hpp"
#include "nncert/core/tensor.hpp"
#include "nncert/scalars/domain.hpp"

namespace nncert {

/// Typed input context: one tensor per leaf (input or param node), in
/// ascending node id order, matching WellTypedGraph::leaves().
template <class S>
using Context = std::vector<Tensor<S>>;

/// Forward trace indexed by node id.
template <class S>
using NodeValues = std::vector<Tensor<S>>;

/// Converts a binary64 tensor into domain D elementwise.
template <ScalarDomain D>
Tensor<typename D::value_type> to_domain(const Tensor<double>& t) {
  return t.map([](double x) { return D::from_double(x); });
}

/// Builds a context from input tensors (in input-node order) and a
/// parameter store of the same scalar type. Parameters are looked up by
/// each param node's key.
template <class S>
Context<S> assemble_context(const WellTypedGraph& g, std::span<const Tensor<S>> inputs, const ParamStore<S>& params) {
  if (inputs.size() != g.inputs().size()) {
    throw TypingError("expected " + std::to_string(g.inputs().size()) + " input tensors, got " +
                      std::to_string(inputs.size()));
  }
  Context<S> ctx;
  std::size_t next_input = 0;
  for (auto id : g.leaves()) {
    const Node& n = g.node(id);
    if (n.kind.tag() == OpTag::input) {
      const auto& t = inputs[next_input++];
      if (!(t.shape() == n.out_shape)) {
        throw TypingError("input node " + std::to_string(id) + " expects " + n.out_shape.to_string() + ", got " +
                          t.shape().to_string());
      }
      ctx.push_back(t);
    } else {
      ctx.push_back(params.at(n.kind.get<op::Param>().key));
    }
  }
  return ctx;
}

/// As assemble_context, converting binary64 data into domain D.
template <ScalarDomain D>
Context<typename D::value_type> make_context(const WellTypedGraph& g, std::span<const Tensor<double>> inputs,
                                             const ParamStore<double>& params) {
  std::vector<Tensor<typename D::value_type>> conv;
  for (const auto& t : inputs) conv.push_back(to_domain<D>(t));
  const auto pconv = params.map([](const Tensor<double>& t) { return to_domain<D>(t); });
  return assemble_context<typename D::value_type>(g, conv, pconv);
}

template <class S>
void check_context(const WellTypedGraph& g, const Context<S>& ctx, const char* what) {
  const auto leaves = g.leaves();
  if (ctx.size() != leaves.size()) {
    throw TypingError(std::string(what) + ": context has " + std::to_string(ctx.size()) + " entries, graph has " +
                      std::to_string(leaves.size()) + " leaves");
  }
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    if (!(ctx[k].shape() == g.node(leaves[k]).out_shape)) {
      throw TypingError(std::string(what) + ": leaf " + std::to_string(leaves[k]) + " expects " +
                        g.node(leaves[k]).out_shape.to_string() + ", got " + ctx[k].shape().to_string());
    }
  }
}

namespace kernels {

/// Row count and row width of a linear node's input ([in] or [B,in]).
inline std::pair<std::size_t, std::size_t> rows_of(const Shape& x) {
  return x.rank() == 1 ? std::pair{std::size_t{1}, x[0]} : std::pair{x[0], x[1]};
}

/// Decomposes a shape around a softmax axis into (outer, len, inner).
struct Fibers {
  std::size_t outer = 1, len = 1, inner = 1;
  std::size_t at(std::size_t o, std::size_t j, std::size_t i) const { return (o * len + j) * inner + i; }
};

inline Fibers fibers(const Shape& s, std::size_t axis) {
  Fibers f;
  const auto d = s.dims();
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (k < axis) f.outer *= d[k];
    else if (k == axis) f.len = d[k];
    else f.inner *= d[k];
  }
  return f;
}

template <ScalarDomain D>
using V = typename D::value_type;

template <ScalarDomain D, class F>
Tensor<V<D>> zip(const Tensor<V<D>>& a, const Tensor<V<D>>& b, F f) {
  std::vector<V<D>> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(f(a[i], b[i]));
  return Tensor<V<D>>(a.shape(), std::move(out));
}

/// Left-to-right sum starting from the first element.
template <ScalarDomain D>
V<D> sum(std::span<const V<D>> xs) {
  V<D> acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = D::add(acc, xs[i]);
  return acc;
}

template <ScalarDomain D>
Tensor<V<D>> linear(const Node& n, const Tensor<V<D>>& x, const Tensor<V<D>>& w, const Tensor<V<D>>& b) {
  const auto [rows, in] = rows_of(x.shape());
  const auto out = w.shape()[0];
  std::vector<V<D>> y;
  y.reserve(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      V<D> acc = D::mul(w[o * in], x[r * in]);
      for (std::size_t i = 1; i < in; ++i) acc = D::add(acc, D::mul(w[o * in + i], x[r * in + i]));
      y.push_back(D::add(acc, b[o]));
    }
  }
  return Tensor<V<D>>(n.out_shape, std::move(y));
}

template <ScalarDomain D>
Tensor<V<D>> matmul(const Node& n, const Tensor<V<D>>& a, const Tensor<V<D>>& b) {
  const auto m = a.shape()[0], k = a.shape()[1];
  const auto cols = b.shape().rank() == 1 ? std::size_t{1} : b.shape()[1];
  std::vector<V<D>> y;
  y.reserve(m * cols);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      V<D> acc = D::mul(a[r * k], b[c]);
      for (std::size_t i = 1; i < k; ++i) acc = D::add(acc, D::mul(a[r * k + i], b[i * cols + c]));
      y.push_back(acc);
    }
  }
  return Tensor<V<D>>(n.out_shape, std::move(y));
}

template <ScalarDomain D>
Tensor<V<D>> softmax(const Tensor<V<D>>& x, std::size_t axis) {
  const auto f = fibers(x.shape(), axis);
  std::vector<V<D>> y(x.size(), D::zero());
  std::vector<V<D>> e(f.len, D::zero());
  for (std::size_t o = 0; o < f.outer; ++o) {
    for (std::size_t i = 0; i < f.inner; ++i) {
      V<D> m = x[f.at(o, 0, i)];
      for (std::size_t j = 1; j < f.len; ++j) m = D::max(m, x[f.at(o, j, i)]);
      for (std::size_t j = 0; j < f.len; ++j) e[j] = D::exp(D::sub(x[f.at(o, j, i)], m));
      const V<D> s = sum<D>(e);
      for (std::size_t j = 0; j < f.len; ++j) y[f.at(o, j, i)] = D::div(e[j], s);
    }
  }
  return Tensor<V<D>>(x.shape(), std::move(y));
}

/// softmax without the max shift (reference form for testing the shift).
template <ScalarDomain D>
Tensor<V<D>> softmax_unshifted(const Tensor<V<D>>& x, std::size_t axis) {
  const auto f = fibers(x.shape(), axis);
  std::vector<V<D>> y(x.size(), D::zero());
  std::vector<V<D>> e(f.len, D::zero());
  for (std::size_t o = 0; o < f.outer; ++o) {
    for (std::size_t i = 0; i < f.inner; ++i) {
      for (std::size_t j = 0; j < f.len; ++j) e[j] = D::exp(x[f.at(o, j, i)]);
      const V<D> s = sum<D>(e);
      for (std::size_t j = 0; j < f.len; ++j) y[f.at(o, j, i)] = D::div(e[j], s);
    }
  }
  return Tensor<V<D>>(x.shape(), std::move(y));
}

}  // namespace kernels

/// Evaluates one non-leaf node from its parents' values.
template <ScalarDomain D>
Tensor<typename D::value_type> forward_node(const Node& n, std::span<const Tensor<typename D::value_type>* const> p) {
  using VT = typename D::value_type;
  using T = Tensor<VT>;
  auto unary = [&](auto fn) { return p[0]->map(fn); };
  switch (n.kind.tag()) {
    case OpTag::input:
    case OpTag::param: throw Error("forward_node called on a leaf");
    case OpTag::linear: return kernels::linear<D>(n, *p[0], *p[1], *p[2]);
    case OpTag::matmul: return kernels::matmul<D>(n, *p[0], *p[1]);
    case OpTag::add: return kernels::zip<D>(*p[0], *p[1], [](const VT& a, const VT& b) { return D::add(a, b); });
    case OpTag::sub: return kernels::zip<D>(*p[0], *p[1], [](const VT& a, const VT& b) { return D::sub(a, b); });
    case OpTag::mul_elem:
      return kernels::zip<D>(*p[0], *p[1], [](const VT& a, const VT& b) { return D::mul(a, b); });
    case OpTag::relu: return unary([](const VT& a) { return D::max(a, D::zero()); });
    case OpTag::tanh: return unary([](const VT& a) { return D::tanh(a); });
    case OpTag::sigmoid: return unary([](const VT& a) { return D::sigmoid(a); });
    case OpTag::exp: return unary([](const VT& a) { return D::exp(a); });
    case OpTag::reduce_sum: return T::scalar(kernels::sum<D>(p[0]->data()));
    case OpTag::reduce_mean:
      return T::scalar(D::div(kernels::sum<D>(p[0]->data()), D::from_double(static_cast<double>(p[0]->size()))));
    case OpTag::reshape:
    case OpTag::flatten: return p[0]->reshaped(n.out_shape);
    case OpTag::mse_loss: {
      const T sq = kernels::zip<D>(*p[0], *p[1], [](const VT& a, const VT& b) { return D::sqr(D::sub(a, b)); });
      return T::scalar(D::div(kernels::sum<D>(sq.data()), D::from_double(static_cast<double>(sq.size()))));
    }
    case OpTag::softmax: return kernels::softmax<D>(*p[0], n.kind.get<op::Softmax>().axis);
  }
  throw Error("unknown op");
}

/// Node values in ascending id order. Domain errors are reported as
/// EvalError carrying the failing node id.
template <ScalarDomain D>
NodeValues<typename D::value_type> eval_graph(const WellTypedGraph& g, const Context<typename D::value_type>& ctx) {
  using T = Tensor<typename D::value_type>;
  check_context(g, ctx, "eval");
  NodeValues<typename D::value_type> vals;
  vals.reserve(g.size());
  std::size_t slot = 0;
  std::vector<const T*> ps;
  for (const Node& n : g.nodes()) {
    if (n.kind.tag() == OpTag::input || n.kind.tag() == OpTag::param) {
      vals.push_back(ctx[slot++]);
      continue;
    }
    ps.clear();
    for (auto q : n.parents) ps.push_back(&vals[q]);
    try {
      vals.push_back(forward_node<D>(n, ps));
    } catch (const DomainError& e) {
      throw EvalError(n.id, e.what());
    }
  }
  return vals;
}

/// Output tensor only.
template <ScalarDomain D>
Tensor<typename D::value_type> eval_output(const WellTypedGraph& g, const Context<typename D::value_type>& ctx) {
  return eval_graph<D>(g, ctx)[g.output_id()];
}

}  // namespace nncert
