// SPDX-License-Identifier: Apache-2.0
//
// Small hand-built graphs shared by several suites.

#pragma once

#include <utility>

#include "nncert/autograd/ad.hpp"
#include "nncert/autograd/optim.hpp"

namespace nncert::testing {

struct Fixture {
  WellTypedGraph g;
  ParamStore<double> params;
  std::vector<Tensor<double>> inputs;
};

/// 3-sample linear regression: x [3,2], y [3,1], fc.W [1,2] and fc.b [1]
/// at zero, loss = mse(linear(x), y).
inline Fixture linreg3() {
  GraphBuilder b;
  const auto x = b.input(Shape::mat(3, 2));
  const auto y = b.input(Shape::mat(3, 1));
  const auto w = b.param("fc.W", Shape::mat(1, 2));
  const auto bias = b.param("fc.b", Shape::vec(1));
  const auto pred = b.add(op::Linear{2, 1}, {x, w, bias});
  b.add(op::MseLoss{}, {pred, y});
  ParamStore<double> p;
  p.push("fc.W", Tensor<double>(Shape::mat(1, 2), {0, 0}));
  p.push("fc.b", Tensor<double>(Shape::vec(1), {0}));
  auto g = validate_graph(std::move(b).build(), p);
  std::vector<Tensor<double>> in{Tensor<double>(Shape::mat(3, 2), {1, 0, 0, 1, 1, 1}),
                                 Tensor<double>(Shape::mat(3, 1), {2, -3, -1})};
  return {std::move(g), std::move(p), std::move(in)};
}

/// y = relu(2x - 1) for scalar-vector x of size 1.
inline Fixture relu_affine() {
  GraphBuilder b;
  const auto x = b.input(Shape::vec(1));
  const auto w = b.param("w", Shape::mat(1, 1));
  const auto bias = b.param("b", Shape::vec(1));
  const auto h = b.add(op::Linear{1, 1}, {x, w, bias});
  b.add(op::Relu{}, {h});
  ParamStore<double> p;
  p.push("w", Tensor<double>(Shape::mat(1, 1), {2}));
  p.push("b", Tensor<double>(Shape::vec(1), {-1}));
  return {validate_graph(std::move(b).build(), p), std::move(p), {}};
}

/// Single relu over a [2]-input (the relu toy).
inline Fixture relu_toy() {
  GraphBuilder b;
  const auto x = b.input(Shape::vec(2));
  b.add(op::Relu{}, {x});
  ParamStore<double> p;
  return {validate_graph(std::move(b).build(), p), std::move(p), {}};
}

/// Loss curve of plain SGD under domain D.
template <ScalarDomain D>
std::vector<double> train_losses(const Fixture& f, int steps, double lr) {
  using VT = typename D::value_type;
  std::vector<Tensor<VT>> in;
  for (const auto& t : f.inputs) in.push_back(to_domain<D>(t));
  const auto p = f.params.map([](const Tensor<double>& t) { return to_domain<D>(t); });
  return train_sgd<D>(f.g, in, p, steps, lr).first;
}

}  // namespace nncert::testing
