// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nncert/core/error.hpp"

namespace nncert {

/// Tensor shape. Structurally the inductive tree `scalar | dim(n, inner)`,
/// stored as the list of dim counts from the outermost inward. An empty
/// list is the scalar shape.
class Shape {
 public:
  Shape() = default;

  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    for (auto n : dims_) {
      if (n == 0) throw TypingError("shape dims must be >= 1, got " + to_string());
    }
  }

  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

  static Shape scalar() { return Shape(); }
  static Shape vec(std::size_t n) { return Shape({n}); }
  static Shape mat(std::size_t m, std::size_t n) { return Shape({m, n}); }

  /// dim(n, inner) constructor of the inductive view.
  static Shape dim(std::size_t n, const Shape& inner) {
    std::vector<std::size_t> d{n};
    d.insert(d.end(), inner.dims_.begin(), inner.dims_.end());
    return Shape(std::move(d));
  }

  std::span<const std::size_t> dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  bool is_scalar() const { return dims_.empty(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }

  std::size_t size() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }

  /// Leading dim count and inner shape of a non-scalar shape.
  std::size_t leading() const { return dims_.at(0); }
  Shape inner() const {
    if (dims_.empty()) throw TypingError("scalar shape has no inner shape");
    return Shape(std::vector<std::size_t>(dims_.begin() + 1, dims_.end()));
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

}  // namespace nncert
