// SPDX-License-Identifier: Apache-2.0
//
// Op-tagged SSA/DAG IR. Every node is defined once, its parents carry
// strictly smaller ids, so ascending id order is a topological order.

#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nncert/core/error.hpp"
#include "nncert/core/shape.hpp"
#include "nncert/core/tensor.hpp"

namespace nncert {

namespace op {
struct Input {};
struct Param {
  std::string key;
};
/// y = W x + b with parents [x, W, b]; x is [in] or a batch [B, in].
struct Linear {
  std::size_t in_dim;
  std::size_t out_dim;
};
struct MatMul {};
struct Add {};
struct Sub {};
struct MulElem {};
struct Relu {};
struct Tanh {};
struct Sigmoid {};
struct Exp {};
struct ReduceSum {};
struct ReduceMean {};
struct Reshape {
  Shape target;
};
struct Flatten {};
struct MseLoss {};
struct Softmax {
  std::size_t axis;
};
}  // namespace op

enum class OpTag {
  input,
  param,
  linear,
  matmul,
  add,
  sub,
  mul_elem,
  relu,
  tanh,
  sigmoid,
  exp,
  reduce_sum,
  reduce_mean,
  reshape,
  flatten,
  mse_loss,
  softmax,
};

inline constexpr const char* op_name(OpTag t) {
  switch (t) {
    case OpTag::input: return "input";
    case OpTag::param: return "param";
    case OpTag::linear: return "linear";
    case OpTag::matmul: return "matmul";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::mul_elem: return "mul_elem";
    case OpTag::relu: return "relu";
    case OpTag::tanh: return "tanh";
    case OpTag::sigmoid: return "sigmoid";
    case OpTag::exp: return "exp";
    case OpTag::reduce_sum: return "reduce_sum";
    case OpTag::reduce_mean: return "reduce_mean";
    case OpTag::reshape: return "reshape";
    case OpTag::flatten: return "flatten";
    case OpTag::mse_loss: return "mse_loss";
    case OpTag::softmax: return "softmax";
  }
  return "?";
}

inline std::optional<OpTag> op_tag_from_name(std::string_view name) {
  for (int t = 0; t <= static_cast<int>(OpTag::softmax); ++t) {
    if (name == op_name(static_cast<OpTag>(t))) return static_cast<OpTag>(t);
  }
  return std::nullopt;
}

/// Tagged union of primitives. Each alternative carries exactly the
/// parameters needed to interpret it.
class OpKind {
 public:
  using Variant = std::variant<op::Input, op::Param, op::Linear, op::MatMul, op::Add, op::Sub, op::MulElem,
                               op::Relu, op::Tanh, op::Sigmoid, op::Exp, op::ReduceSum, op::ReduceMean,
                               op::Reshape, op::Flatten, op::MseLoss, op::Softmax>;

  template <class T>
  OpKind(T alt) : v_(std::move(alt)) {}  // NOLINT(google-explicit-constructor)

  /// Alternatives are declared in OpTag order.
  OpTag tag() const { return static_cast<OpTag>(v_.index()); }
  const char* name() const { return op_name(tag()); }

  template <class T>
  const T& get() const { return std::get<T>(v_); }
  template <class T>
  bool is() const { return std::holds_alternative<T>(v_); }

  const Variant& variant() const { return v_; }

  std::size_t arity() const {
    switch (tag()) {
      case OpTag::input:
      case OpTag::param: return 0;
      case OpTag::linear: return 3;
      case OpTag::matmul:
      case OpTag::add:
      case OpTag::sub:
      case OpTag::mul_elem:
      case OpTag::mse_loss: return 2;
      default: return 1;
    }
  }

 private:
  Variant v_;
};

struct Node {
  std::size_t id = 0;
  std::vector<std::size_t> parents;
  OpKind kind = op::Input{};
  Shape out_shape;
};

struct Graph {
  std::vector<Node> nodes;
  std::size_t output_id = 0;
};

/// Ordered, shape-indexed parameter pack keyed by name.
template <class S>
class ParamStore {
 public:
  ParamStore() = default;

  void set(const std::string& key, Tensor<S> value) {
    for (auto& e : entries_) {
      if (e.first == key) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(key, std::move(value));
  }

  /// Appends without replacing; duplicate keys are rejected at validation.
  void push(const std::string& key, Tensor<S> value) { entries_.emplace_back(key, std::move(value)); }

  const Tensor<S>* find(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e.first == key) return &e.second;
    }
    return nullptr;
  }

  const Tensor<S>& at(const std::string& key) const {
    if (const auto* t = find(key)) return *t;
    throw Error("unknown parameter '" + key + "'");
  }

  std::size_t count(const std::string& key) const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; }));
  }

  std::span<const std::pair<std::string, Tensor<S>>> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  template <class F>
  auto map(F&& f) const {
    using R = typename decltype(f(std::declval<const Tensor<S>&>()))::value_type;
    ParamStore<R> out;
    for (const auto& [k, t] : entries_) out.push(k, f(t));
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor<S>>> entries_;
};

/// Output shape of a primitive given its parent shapes. Leaf kinds (input,
/// param) have no rule here; their shapes are declared.
inline Shape infer_shape(const OpKind& kind, std::span<const Shape> parents) {
  if (parents.size() != kind.arity()) {
    throw TypingError(std::string(kind.name()) + " expects " + std::to_string(kind.arity()) + " parents, got " +
                      std::to_string(parents.size()));
  }
  auto expect = [](std::size_t i, const Shape& want, const Shape& got) {
    if (!(want == got)) throw TypingError(i, want.to_string(), got.to_string());
  };
  switch (kind.tag()) {
    case OpTag::input:
    case OpTag::param:
      throw TypingError(std::string(kind.name()) + " shapes are declared, not inferred");
    case OpTag::linear: {
      const auto& l = kind.get<op::Linear>();
      const Shape& x = parents[0];
      Shape out;
      if (x.rank() == 1) {
        expect(0, Shape::vec(l.in_dim), x);
        out = Shape::vec(l.out_dim);
      } else if (x.rank() == 2) {
        expect(0, Shape::mat(x[0], l.in_dim), x);
        out = Shape::mat(x[0], l.out_dim);
      } else {
        throw TypingError(0, "[" + std::to_string(l.in_dim) + "] or [B," + std::to_string(l.in_dim) + "]",
                          x.to_string());
      }
      expect(1, Shape::mat(l.out_dim, l.in_dim), parents[1]);
      expect(2, Shape::vec(l.out_dim), parents[2]);
      return out;
    }
    case OpTag::matmul: {
      const Shape& a = parents[0];
      const Shape& b = parents[1];
      if (a.rank() != 2) throw TypingError(0, "[m,k]", a.to_string());
      if (b.rank() == 1) {
        expect(1, Shape::vec(a[1]), b);
        return Shape::vec(a[0]);
      }
      if (b.rank() != 2 || b[0] != a[1]) {
        throw TypingError(1, "[" + std::to_string(a[1]) + ",n]", b.to_string());
      }
      return Shape::mat(a[0], b[1]);
    }
    case OpTag::add:
    case OpTag::sub:
    case OpTag::mul_elem:
      expect(1, parents[0], parents[1]);
      return parents[0];
    case OpTag::mse_loss:
      expect(1, parents[0], parents[1]);
      return Shape::scalar();
    case OpTag::relu:
    case OpTag::tanh:
    case OpTag::sigmoid:
    case OpTag::exp: return parents[0];
    case OpTag::reduce_sum:
    case OpTag::reduce_mean: return Shape::scalar();
    case OpTag::reshape: {
      const auto& target = kind.get<op::Reshape>().target;
      if (target.size() != parents[0].size()) {
        throw TypingError(0, "size " + std::to_string(target.size()), parents[0].to_string());
      }
      return target;
    }
    case OpTag::flatten: return Shape::vec(parents[0].size());
    case OpTag::softmax: {
      const auto axis = kind.get<op::Softmax>().axis;
      if (axis >= parents[0].rank()) {
        throw TypingError(0, "rank > " + std::to_string(axis), parents[0].to_string());
      }
      return parents[0];
    }
  }
  throw TypingError("unknown op");
}

/// A graph that passed validate_graph. Only validate_graph can create one,
/// and it is immutable afterwards; copies share the node storage.
class WellTypedGraph {
 public:
  const Graph& graph() const { return *graph_; }
  std::span<const Node> nodes() const { return graph_->nodes; }
  const Node& node(std::size_t id) const { return graph_->nodes.at(id); }
  std::size_t size() const { return graph_->nodes.size(); }
  std::size_t output_id() const { return graph_->output_id; }
  const Node& output() const { return graph_->nodes[graph_->output_id]; }

  /// Input and param nodes in ascending id order: the context layout.
  std::span<const std::size_t> leaves() const { return leaves_; }
  std::span<const std::size_t> inputs() const { return inputs_; }
  std::span<const std::size_t> params() const { return params_; }

  /// Position of a leaf node in the context, or nullopt for non-leaves.
  std::optional<std::size_t> leaf_slot(std::size_t id) const {
    auto it = std::find(leaves_.begin(), leaves_.end(), id);
    if (it == leaves_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - leaves_.begin());
  }

  /// Flattened graph input dimension (sum of input node sizes) and the
  /// offset of each input node inside that vector.
  std::size_t input_dim() const { return input_dim_; }
  std::size_t input_offset(std::size_t input_index) const { return input_offsets_.at(input_index); }

 private:
  template <class S>
  friend WellTypedGraph validate_graph(Graph g, const ParamStore<S>& params);

  explicit WellTypedGraph(Graph g) : graph_(std::make_shared<const Graph>(std::move(g))) {
    std::size_t off = 0;
    for (const auto& n : graph_->nodes) {
      if (n.kind.tag() == OpTag::input) {
        inputs_.push_back(n.id);
        leaves_.push_back(n.id);
        input_offsets_.push_back(off);
        off += n.out_shape.size();
      } else if (n.kind.tag() == OpTag::param) {
        params_.push_back(n.id);
        leaves_.push_back(n.id);
      }
    }
    input_dim_ = off;
  }

  std::shared_ptr<const Graph> graph_;
  std::vector<std::size_t> leaves_;
  std::vector<std::size_t> inputs_;
  std::vector<std::size_t> params_;
  std::vector<std::size_t> input_offsets_;
  std::size_t input_dim_ = 0;
};

/// Checks SSA order, arity, shapes and parameter resolution. Reports the
/// first failing node.
template <class S>
WellTypedGraph validate_graph(Graph g, const ParamStore<S>& params) {
  const auto n = g.nodes.size();
  if (n == 0) throw ValidationError(0, ValidationRule::output, "graph has no nodes");
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.nodes[i];
    if (node.id != i) {
      throw ValidationError(i, ValidationRule::ssa_order, "node at position " + std::to_string(i) +
                                                              " has id " + std::to_string(node.id));
    }
    for (auto p : node.parents) {
      if (p >= i) {
        throw ValidationError(i, ValidationRule::ssa_order, "parent " + std::to_string(p) + " is not < " +
                                                                std::to_string(i));
      }
    }
    if (node.parents.size() != node.kind.arity()) {
      throw ValidationError(i, ValidationRule::arity,
                            std::string(node.kind.name()) + " expects " + std::to_string(node.kind.arity()) +
                                " parents, got " + std::to_string(node.parents.size()));
    }
    switch (node.kind.tag()) {
      case OpTag::input: break;
      case OpTag::param: {
        const auto& key = node.kind.get<op::Param>().key;
        const auto count = params.count(key);
        if (count != 1) {
          throw ValidationError(i, ValidationRule::param_resolution,
                                "key '" + key + "' resolves to " + std::to_string(count) + " entries");
        }
        const auto& shape = params.find(key)->shape();
        if (!(shape == node.out_shape)) {
          throw ValidationError(i, ValidationRule::param_resolution,
                                "key '" + key + "' has shape " + shape.to_string() + ", node declares " +
                                    node.out_shape.to_string());
        }
        break;
      }
      default: {
        std::vector<Shape> ps;
        ps.reserve(node.parents.size());
        for (auto p : node.parents) ps.push_back(g.nodes[p].out_shape);
        Shape inferred;
        try {
          inferred = infer_shape(node.kind, ps);
        } catch (const TypingError& e) {
          throw ValidationError(i, ValidationRule::shape, e.what());
        }
        if (!(inferred == node.out_shape)) {
          throw ValidationError(i, ValidationRule::shape,
                                "declared " + node.out_shape.to_string() + ", inferred " + inferred.to_string());
        }
      }
    }
  }
  if (g.output_id >= n) {
    throw ValidationError(g.output_id, ValidationRule::output, "output id out of range");
  }
  return WellTypedGraph(std::move(g));
}

/// Single-owner builder; shapes of non-leaf nodes are inferred on add.
class GraphBuilder {
 public:
  std::size_t input(Shape shape) { return push(op::Input{}, {}, std::move(shape)); }

  std::size_t param(std::string key, Shape shape) { return push(op::Param{std::move(key)}, {}, std::move(shape)); }

  std::size_t add(OpKind kind, std::vector<std::size_t> parents) {
    std::vector<Shape> ps;
    for (auto p : parents) ps.push_back(g_.nodes.at(p).out_shape);
    Shape out = infer_shape(kind, ps);
    return push(std::move(kind), std::move(parents), std::move(out));
  }

  /// Adds a node with an explicit declared shape, unchecked until validation.
  std::size_t add_declared(OpKind kind, std::vector<std::size_t> parents, Shape out) {
    return push(std::move(kind), std::move(parents), std::move(out));
  }

  const Shape& shape_of(std::size_t id) const { return g_.nodes.at(id).out_shape; }
  std::size_t size() const { return g_.nodes.size(); }

  Graph build(std::optional<std::size_t> output = std::nullopt) && {
    g_.output_id = output.value_or(g_.nodes.empty() ? 0 : g_.nodes.size() - 1);
    return std::move(g_);
  }

 private:
  std::size_t push(OpKind kind, std::vector<std::size_t> parents, Shape out) {
    const auto id = g_.nodes.size();
    g_.nodes.push_back(Node{id, std::move(parents), std::move(kind), std::move(out)});
    return id;
  }

  Graph g_;
};

}  // namespace nncert
