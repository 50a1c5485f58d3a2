// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nncert/autograd/ad.hpp"

namespace nncert {

namespace optim_detail {

template <class S>
void check_matching(const ParamStore<S>& params, const ParamStore<S>& grads) {
  if (params.size() != grads.size()) throw TypingError("optimizer: parameter and gradient packs differ in length");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [pk, pt] = params.entries()[k];
    const auto& [gk, gt] = grads.entries()[k];
    if (pk != gk || !(pt.shape() == gt.shape())) {
      throw TypingError("optimizer: entry '" + pk + "' " + pt.shape().to_string() + " does not match gradient '" + gk +
                        "' " + gt.shape().to_string());
    }
  }
}

}  // namespace optim_detail

/// theta - lr * g, elementwise.
template <ScalarDomain D>
ParamStore<typename D::value_type> sgd_step(const ParamStore<typename D::value_type>& params,
                                            const ParamStore<typename D::value_type>& grads, double lr) {
  using VT = typename D::value_type;
  optim_detail::check_matching(params, grads);
  const VT rate = D::from_double(lr);
  ParamStore<VT> out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [key, t] = params.entries()[k];
    const auto& g = grads.entries()[k].second;
    std::vector<VT> data;
    data.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) data.push_back(D::sub(t[i], D::mul(rate, g[i])));
    out.push(key, Tensor<VT>(t.shape(), std::move(data)));
  }
  return out;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class S>
struct AdamState {
  ParamStore<S> m;
  ParamStore<S> v;
  int t = 0;
};

/// One bias-corrected Adam step. An empty state is initialized to zeros.
template <ScalarDomain D>
std::pair<ParamStore<typename D::value_type>, AdamState<typename D::value_type>> adam_step(
    const ParamStore<typename D::value_type>& params, const ParamStore<typename D::value_type>& grads,
    AdamState<typename D::value_type> state, const AdamConfig& cfg) {
  using VT = typename D::value_type;
  optim_detail::check_matching(params, grads);
  if (state.m.size() == 0) {
    for (const auto& [key, t] : params.entries()) {
      state.m.push(key, Tensor<VT>::filled(t.shape(), D::zero()));
      state.v.push(key, Tensor<VT>::filled(t.shape(), D::zero()));
    }
  }
  optim_detail::check_matching(params, state.m);
  state.t += 1;
  const VT b1 = D::from_double(cfg.beta1), b2 = D::from_double(cfg.beta2);
  const VT one_b1 = D::sub(D::one(), b1), one_b2 = D::sub(D::one(), b2);
  const VT corr1 = D::from_double(1.0 - std::pow(cfg.beta1, state.t));
  const VT corr2 = D::from_double(1.0 - std::pow(cfg.beta2, state.t));
  const VT lr = D::from_double(cfg.lr), eps = D::from_double(cfg.eps);

  ParamStore<VT> out, m_out, v_out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [key, t] = params.entries()[k];
    const auto& g = grads.entries()[k].second;
    const auto& m = state.m.entries()[k].second;
    const auto& v = state.v.entries()[k].second;
    std::vector<VT> nt, nm, nv;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const VT mi = D::add(D::mul(b1, m[i]), D::mul(one_b1, g[i]));
      const VT vi = D::add(D::mul(b2, v[i]), D::mul(one_b2, D::sqr(g[i])));
      const VT mhat = D::div(mi, corr1);
      const VT vhat = D::div(vi, corr2);
      nt.push_back(D::sub(t[i], D::div(D::mul(lr, mhat), D::add(D::sqrt(vhat), eps))));
      nm.push_back(mi);
      nv.push_back(vi);
    }
    out.push(key, Tensor<VT>(t.shape(), std::move(nt)));
    m_out.push(key, Tensor<VT>(t.shape(), std::move(nm)));
    v_out.push(key, Tensor<VT>(t.shape(), std::move(nv)));
  }
  state.m = std::move(m_out);
  state.v = std::move(v_out);
  return {std::move(out), std::move(state)};
}

/// Plain SGD on a scalar-loss graph. Returns the loss before each step and
/// after the last one (steps + 1 values) together with the final params.
template <ScalarDomain D>
std::pair<std::vector<double>, ParamStore<typename D::value_type>> train_sgd(
    const WellTypedGraph& g, std::span<const Tensor<typename D::value_type>> inputs,
    ParamStore<typename D::value_type> params, int steps, double lr) {
  using VT = typename D::value_type;
  if (!g.output().out_shape.is_scalar()) throw TypingError("train: loss output must be a scalar");
  std::vector<double> losses;
  for (int s = 0; s <= steps; ++s) {
    const auto ctx = assemble_context<VT>(g, inputs, params);
    const auto loss = eval_output<D>(g, ctx);
    losses.push_back(D::to_double(loss[0]));
    if (s == steps) break;
    const auto cot = vjp<D>(g, ctx, Tensor<VT>::scalar(D::one()));
    const auto grads = param_gradients<D>(g, params, cot);
    params = sgd_step<D>(params, grads, lr);
  }
  return {std::move(losses), std::move(params)};
}

}  // namespace nncert
