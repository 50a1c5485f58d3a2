// SPDX-License-Identifier: Apache-2.0
//
// Forward-mode tangents (JVP) and reverse-mode cotangents (VJP) over the
// static graph. ReLU uses derivative 0 at a pre-activation of exactly 0.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "nncert/autograd/eval.hpp"

namespace nncert {

namespace ad_detail {

template <ScalarDomain D>
using V = typename D::value_type;

template <ScalarDomain D>
Tensor<V<D>> zeros(const Shape& s) {
  return Tensor<V<D>>::filled(s, D::zero());
}

template <ScalarDomain D>
void accumulate(Tensor<V<D>>& into, std::size_t i, const V<D>& v) {
  into[i] = D::add(into[i], v);
}

/// Derivative factor of an elementwise nonlinearity given input and output.
template <ScalarDomain D>
V<D> unary_slope(OpTag tag, const V<D>& x, const V<D>& y) {
  switch (tag) {
    case OpTag::relu: return D::lt(D::zero(), x) ? D::one() : D::zero();
    case OpTag::tanh: return D::sub(D::one(), D::sqr(y));
    case OpTag::sigmoid: return D::mul(y, D::sub(D::one(), y));
    case OpTag::exp: return y;
    default: throw Error("not an elementwise nonlinearity");
  }
}

}  // namespace ad_detail

/// Output tangent for input/param tangent dctx at ctx.
template <ScalarDomain D>
Tensor<typename D::value_type> jvp(const WellTypedGraph& g, const Context<typename D::value_type>& ctx,
                                   const Context<typename D::value_type>& dctx) {
  using VT = typename D::value_type;
  using T = Tensor<VT>;
  using namespace ad_detail;
  check_context(g, dctx, "jvp tangent");
  const auto vals = eval_graph<D>(g, ctx);
  std::vector<T> dv;
  dv.reserve(g.size());
  std::size_t slot = 0;
  for (const Node& n : g.nodes()) {
    const auto tag = n.kind.tag();
    if (tag == OpTag::input || tag == OpTag::param) {
      dv.push_back(dctx[slot++]);
      continue;
    }
    const auto& P = n.parents;
    T out = zeros<D>(n.out_shape);
    switch (tag) {
      case OpTag::linear: {
        // d(Wx + b) = W dx + dW x + db
        const T& x = vals[P[0]];
        const T& w = vals[P[1]];
        const auto [rows, in] = kernels::rows_of(x.shape());
        const auto outd = w.shape()[0];
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            VT acc = dv[P[2]][o];
            for (std::size_t i = 0; i < in; ++i) {
              acc = D::add(acc, D::mul(w[o * in + i], dv[P[0]][r * in + i]));
              acc = D::add(acc, D::mul(dv[P[1]][o * in + i], x[r * in + i]));
            }
            out[r * outd + o] = acc;
          }
        }
        break;
      }
      case OpTag::matmul: {
        const T& a = vals[P[0]];
        const T& b = vals[P[1]];
        const auto m = a.shape()[0], k = a.shape()[1];
        const auto cols = b.shape().rank() == 1 ? std::size_t{1} : b.shape()[1];
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            VT acc = D::zero();
            for (std::size_t i = 0; i < k; ++i) {
              acc = D::add(acc, D::mul(dv[P[0]][r * k + i], b[i * cols + c]));
              acc = D::add(acc, D::mul(a[r * k + i], dv[P[1]][i * cols + c]));
            }
            out[r * cols + c] = acc;
          }
        }
        break;
      }
      case OpTag::add:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = D::add(dv[P[0]][i], dv[P[1]][i]);
        break;
      case OpTag::sub:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = D::sub(dv[P[0]][i], dv[P[1]][i]);
        break;
      case OpTag::mul_elem:
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = D::add(D::mul(dv[P[0]][i], vals[P[1]][i]), D::mul(vals[P[0]][i], dv[P[1]][i]));
        }
        break;
      case OpTag::relu:
      case OpTag::tanh:
      case OpTag::sigmoid:
      case OpTag::exp:
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = D::mul(unary_slope<D>(tag, vals[P[0]][i], vals[n.id][i]), dv[P[0]][i]);
        }
        break;
      case OpTag::reduce_sum:
      case OpTag::reduce_mean: {
        VT acc = D::zero();
        for (const auto& t : dv[P[0]].data()) acc = D::add(acc, t);
        if (tag == OpTag::reduce_mean) acc = D::div(acc, D::from_double(static_cast<double>(dv[P[0]].size())));
        out[0] = acc;
        break;
      }
      case OpTag::reshape:
      case OpTag::flatten: out = dv[P[0]].reshaped(n.out_shape); break;
      case OpTag::mse_loss: {
        const auto cnt = vals[P[0]].size();
        VT acc = D::zero();
        for (std::size_t i = 0; i < cnt; ++i) {
          const VT diff = D::sub(vals[P[0]][i], vals[P[1]][i]);
          acc = D::add(acc, D::mul(diff, D::sub(dv[P[0]][i], dv[P[1]][i])));
        }
        out[0] = D::div(D::mul(D::from_double(2.0), acc), D::from_double(static_cast<double>(cnt)));
        break;
      }
      case OpTag::softmax: {
        // D softmax(x)[dx] = s * (dx - <s, dx>) along each fiber
        const T& s = vals[n.id];
        const auto f = kernels::fibers(s.shape(), n.kind.get<op::Softmax>().axis);
        for (std::size_t o = 0; o < f.outer; ++o) {
          for (std::size_t i = 0; i < f.inner; ++i) {
            VT inner = D::zero();
            for (std::size_t j = 0; j < f.len; ++j) {
              inner = D::add(inner, D::mul(s[f.at(o, j, i)], dv[P[0]][f.at(o, j, i)]));
            }
            for (std::size_t j = 0; j < f.len; ++j) {
              const auto idx = f.at(o, j, i);
              out[idx] = D::mul(s[idx], D::sub(dv[P[0]][idx], inner));
            }
          }
        }
        break;
      }
      default: throw Error("jvp: unsupported op");
    }
    dv.push_back(std::move(out));
  }
  return dv[g.output_id()];
}

/// Cotangents for every leaf (context layout) given an output seed.
template <ScalarDomain D>
Context<typename D::value_type> vjp(const WellTypedGraph& g, const Context<typename D::value_type>& ctx,
                                    const Tensor<typename D::value_type>& seed) {
  using VT = typename D::value_type;
  using T = Tensor<VT>;
  using namespace ad_detail;
  if (!(seed.shape() == g.output().out_shape)) {
    throw TypingError("vjp: seed shape " + seed.shape().to_string() + " does not match output " +
                      g.output().out_shape.to_string());
  }
  const auto vals = eval_graph<D>(g, ctx);
  std::vector<T> bar;
  bar.reserve(g.size());
  for (const Node& n : g.nodes()) bar.push_back(zeros<D>(n.out_shape));
  bar[g.output_id()] = seed;

  for (std::size_t id = g.size(); id-- > 0;) {
    const Node& n = g.node(id);
    const auto tag = n.kind.tag();
    if (tag == OpTag::input || tag == OpTag::param) continue;
    const auto& P = n.parents;
    const T& yb = bar[id];
    switch (tag) {
      case OpTag::linear: {
        // x_bar += W^T y_bar, W_bar += y_bar x^T, b_bar += y_bar
        const T& x = vals[P[0]];
        const T& w = vals[P[1]];
        const auto [rows, in] = kernels::rows_of(x.shape());
        const auto outd = w.shape()[0];
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const VT yo = yb[r * outd + o];
            accumulate<D>(bar[P[2]], o, yo);
            for (std::size_t i = 0; i < in; ++i) {
              accumulate<D>(bar[P[0]], r * in + i, D::mul(w[o * in + i], yo));
              accumulate<D>(bar[P[1]], o * in + i, D::mul(yo, x[r * in + i]));
            }
          }
        }
        break;
      }
      case OpTag::matmul: {
        const T& a = vals[P[0]];
        const T& b = vals[P[1]];
        const auto m = a.shape()[0], k = a.shape()[1];
        const auto cols = b.shape().rank() == 1 ? std::size_t{1} : b.shape()[1];
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const VT y = yb[r * cols + c];
            for (std::size_t i = 0; i < k; ++i) {
              accumulate<D>(bar[P[0]], r * k + i, D::mul(y, b[i * cols + c]));
              accumulate<D>(bar[P[1]], i * cols + c, D::mul(a[r * k + i], y));
            }
          }
        }
        break;
      }
      case OpTag::add:
        for (std::size_t i = 0; i < yb.size(); ++i) {
          accumulate<D>(bar[P[0]], i, yb[i]);
          accumulate<D>(bar[P[1]], i, yb[i]);
        }
        break;
      case OpTag::sub:
        for (std::size_t i = 0; i < yb.size(); ++i) {
          accumulate<D>(bar[P[0]], i, yb[i]);
          accumulate<D>(bar[P[1]], i, D::neg(yb[i]));
        }
        break;
      case OpTag::mul_elem:
        for (std::size_t i = 0; i < yb.size(); ++i) {
          accumulate<D>(bar[P[0]], i, D::mul(yb[i], vals[P[1]][i]));
          accumulate<D>(bar[P[1]], i, D::mul(vals[P[0]][i], yb[i]));
        }
        break;
      case OpTag::relu:
      case OpTag::tanh:
      case OpTag::sigmoid:
      case OpTag::exp:
        for (std::size_t i = 0; i < yb.size(); ++i) {
          accumulate<D>(bar[P[0]], i, D::mul(unary_slope<D>(tag, vals[P[0]][i], vals[id][i]), yb[i]));
        }
        break;
      case OpTag::reduce_sum:
      case OpTag::reduce_mean: {
        VT g0 = yb[0];
        if (tag == OpTag::reduce_mean) g0 = D::div(g0, D::from_double(static_cast<double>(bar[P[0]].size())));
        for (std::size_t i = 0; i < bar[P[0]].size(); ++i) accumulate<D>(bar[P[0]], i, g0);
        break;
      }
      case OpTag::reshape:
      case OpTag::flatten:
        for (std::size_t i = 0; i < yb.size(); ++i) accumulate<D>(bar[P[0]], i, yb[i]);
        break;
      case OpTag::mse_loss: {
        const auto cnt = vals[P[0]].size();
        const VT scale = D::div(D::mul(D::from_double(2.0), yb[0]), D::from_double(static_cast<double>(cnt)));
        for (std::size_t i = 0; i < cnt; ++i) {
          const VT gi = D::mul(scale, D::sub(vals[P[0]][i], vals[P[1]][i]));
          accumulate<D>(bar[P[0]], i, gi);
          accumulate<D>(bar[P[1]], i, D::neg(gi));
        }
        break;
      }
      case OpTag::softmax: {
        const T& s = vals[id];
        const auto f = kernels::fibers(s.shape(), n.kind.get<op::Softmax>().axis);
        for (std::size_t o = 0; o < f.outer; ++o) {
          for (std::size_t i = 0; i < f.inner; ++i) {
            VT inner = D::zero();
            for (std::size_t j = 0; j < f.len; ++j) inner = D::add(inner, D::mul(s[f.at(o, j, i)], yb[f.at(o, j, i)]));
            for (std::size_t j = 0; j < f.len; ++j) {
              const auto idx = f.at(o, j, i);
              accumulate<D>(bar[P[0]], idx, D::mul(s[idx], D::sub(yb[idx], inner)));
            }
          }
        }
        break;
      }
      default: throw Error("vjp: unsupported op");
    }
  }
  Context<VT> out;
  for (auto leaf : g.leaves()) out.push_back(std::move(bar[leaf]));
  return out;
}

/// Sums leaf cotangents of param nodes by store key, in store order.
template <ScalarDomain D, class P>
ParamStore<typename D::value_type> param_gradients(const WellTypedGraph& g, const ParamStore<P>& params,
                                                   const Context<typename D::value_type>& cot) {
  using VT = typename D::value_type;
  ParamStore<VT> grads;
  for (const auto& [key, t] : params.entries()) grads.push(key, Tensor<VT>::filled(t.shape(), D::zero()));
  const auto leaves = g.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Node& n = g.node(leaves[k]);
    if (n.kind.tag() != OpTag::param) continue;
    const auto& key = n.kind.get<op::Param>().key;
    Tensor<VT> acc = *grads.find(key);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = D::add(acc[i], cot[k][i]);
    grads.set(key, std::move(acc));
  }
  return grads;
}

}  // namespace nncert
