// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nncert/core/error.hpp"
#include "nncert/core/shape.hpp"

namespace nncert {

/// Dense row-major tensor over scalar type S. data().size() == shape().size()
/// holds for every constructed value.
template <class S>
class Tensor {
 public:
  using value_type = S;

  Tensor() : data_(1) {}

  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw TypingError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_.to_string());
    }
  }

  static Tensor filled(Shape shape, const S& value) {
    const auto n = shape.size();
    return Tensor(std::move(shape), std::vector<S>(n, value));
  }

  static Tensor scalar(const S& value) { return Tensor(Shape(), {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<const S> data() const { return data_; }
  std::span<S> data() { return data_; }

  const S& operator[](std::size_t flat) const { return data_[flat]; }
  S& operator[](std::size_t flat) { return data_[flat]; }

  /// Row-major offset of a multi-index; throws on rank or bound violations.
  std::size_t offset(std::span<const std::size_t> index) const {
    const auto dims = shape_.dims();
    if (index.size() != dims.size()) throw TypingError("index rank mismatch for " + shape_.to_string());
    std::size_t off = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (index[i] >= dims[i]) throw TypingError("index out of bounds for " + shape_.to_string());
      off = off * dims[i] + index[i];
    }
    return off;
  }

  const S& at(std::initializer_list<std::size_t> index) const {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }
  S& at(std::initializer_list<std::size_t> index) {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }

  /// Same data viewed under a different shape of equal size.
  Tensor reshaped(Shape target) const { return Tensor(std::move(target), data_); }

  template <class F>
  auto map(F&& f) const -> Tensor<decltype(f(std::declval<const S&>()))> {
    using R = decltype(f(std::declval<const S&>()));
    std::vector<R> out;
    out.reserve(data_.size());
    for (const auto& x : data_) out.push_back(f(x));
    return Tensor<R>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<S> data_;
};

template <class S>
std::vector<S> vec(const Tensor<S>& t) {
  return std::vector<S>(t.data().begin(), t.data().end());
}

template <class S>
Tensor<S> unvec(const Shape& shape, std::vector<S> flat) {
  if (flat.size() != shape.size()) {
    throw TypingError("unvec: sequence length " + std::to_string(flat.size()) +
                      " does not match shape " + shape.to_string());
  }
  return Tensor<S>(shape, std::move(flat));
}

/// Coordinatewise inner product over equal shapes.
template <class S>
S dot(const Tensor<S>& a, const Tensor<S>& b) {
  if (!(a.shape() == b.shape())) {
    throw TypingError("dot: shape mismatch " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  S acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace nncert
