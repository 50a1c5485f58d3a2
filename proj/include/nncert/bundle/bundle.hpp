// SPDX-License-Identifier: Apache-2.0
//
// Model bundles: graph structure, parameters, optional input region,
// property and sample data in one canonical JSON document.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nncert/bounds/ibp.hpp"
#include "nncert/bundle/json_io.hpp"
#include "nncert/cert/goals.hpp"

namespace nncert {

struct ModelBundle {
  std::string graph_id;
  Graph graph;
  ParamStore<double> params;
  std::optional<InputRegion> region;
  std::optional<PropertySpec> property;
  json metadata = json::object();
  /// Sample inputs (e.g. training data), one tensor per input node.
  std::optional<std::vector<Tensor<double>>> inputs;

  WellTypedGraph validated() const { return validate_graph(graph, params); }
};

namespace bundle_detail {

inline OpKind read_kind(const json& j, const std::string& path) {
  const auto name = jio::read_string(jio::field(j, "op", path), path + ".op");
  const auto tag = op_tag_from_name(name);
  if (!tag) jio::fail(path + ".op", "unknown op '" + name + "'");
  switch (*tag) {
    case OpTag::input: return op::Input{};
    case OpTag::param: return op::Param{jio::read_string(jio::field(j, "key", path), path + ".key")};
    case OpTag::linear:
      return op::Linear{jio::read_index(jio::field(j, "in_dim", path), path + ".in_dim"),
                        jio::read_index(jio::field(j, "out_dim", path), path + ".out_dim")};
    case OpTag::matmul: return op::MatMul{};
    case OpTag::add: return op::Add{};
    case OpTag::sub: return op::Sub{};
    case OpTag::mul_elem: return op::MulElem{};
    case OpTag::relu: return op::Relu{};
    case OpTag::tanh: return op::Tanh{};
    case OpTag::sigmoid: return op::Sigmoid{};
    case OpTag::exp: return op::Exp{};
    case OpTag::reduce_sum: return op::ReduceSum{};
    case OpTag::reduce_mean: return op::ReduceMean{};
    case OpTag::reshape: return op::Reshape{jio::read_shape(jio::field(j, "target", path), path + ".target")};
    case OpTag::flatten: return op::Flatten{};
    case OpTag::mse_loss: return op::MseLoss{};
    case OpTag::softmax: return op::Softmax{jio::read_index(jio::field(j, "axis", path), path + ".axis")};
  }
  jio::fail(path + ".op", "unknown op");
}

inline json write_node(const Node& n) {
  json j{{"id", n.id}, {"op", n.kind.name()}, {"parents", n.parents}, {"out_shape", jio::write_shape(n.out_shape)}};
  switch (n.kind.tag()) {
    case OpTag::param: j["key"] = n.kind.get<op::Param>().key; break;
    case OpTag::linear:
      j["in_dim"] = n.kind.get<op::Linear>().in_dim;
      j["out_dim"] = n.kind.get<op::Linear>().out_dim;
      break;
    case OpTag::reshape: j["target"] = jio::write_shape(n.kind.get<op::Reshape>().target); break;
    case OpTag::softmax: j["axis"] = n.kind.get<op::Softmax>().axis; break;
    default: break;
  }
  return j;
}

inline json write_region(const InputRegion& r) {
  json a = json::array();
  for (const auto& b : r) {
    std::vector<double> lo(b.lo.data().begin(), b.lo.data().end()), hi(b.hi.data().begin(), b.hi.data().end());
    a.push_back(json{{"lo", jio::write_floats(lo)}, {"hi", jio::write_floats(hi)}});
  }
  return a;
}

inline json write_property(const PropertySpec& p) {
  json cls = json::array();
  for (const auto& c : p.clauses) {
    json rows = json::array();
    for (const auto& r : c.C) rows.push_back(jio::write_floats(r));
    cls.push_back(json{{"C", rows}, {"d", jio::write_floats(c.d)}});
  }
  return json{{"clauses", cls}};
}

}  // namespace bundle_detail

/// Region as [{lo:[...], hi:[...]}], one entry per input node; shapes come
/// from the input nodes.
inline InputRegion read_region(const json& j, const Graph& g, const std::string& path) {
  if (!j.is_array()) jio::fail(path, "expected an array of boxes");
  std::vector<const Node*> inputs;
  for (const auto& n : g.nodes) {
    if (n.kind.tag() == OpTag::input) inputs.push_back(&n);
  }
  if (j.size() != inputs.size()) {
    jio::fail(path, "has " + std::to_string(j.size()) + " boxes, graph has " + std::to_string(inputs.size()) + " inputs");
  }
  InputRegion r;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto p = path + "[" + std::to_string(k) + "]";
    auto lo = jio::read_floats(jio::field(j[k], "lo", p), p + ".lo");
    auto hi = jio::read_floats(jio::field(j[k], "hi", p), p + ".hi");
    const Shape& s = inputs[k]->out_shape;
    if (lo.size() != s.size() || hi.size() != s.size()) jio::fail(p, "box length does not match input shape " + s.to_string());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(lo[i] <= hi[i])) jio::fail(p, "lo > hi at coordinate " + std::to_string(i));
    }
    r.push_back({Tensor<double>(s, std::move(lo)), Tensor<double>(s, std::move(hi))});
  }
  return r;
}

inline json write_region(const InputRegion& r) { return bundle_detail::write_region(r); }

inline PropertySpec read_property(const json& j, const std::string& path) {
  const auto& cls = jio::field(j, "clauses", path);
  if (!cls.is_array()) jio::fail(path + ".clauses", "expected an array");
  PropertySpec p;
  for (std::size_t k = 0; k < cls.size(); ++k) {
    const auto cp = path + ".clauses[" + std::to_string(k) + "]";
    Clause c;
    const auto& rows = jio::field(cls[k], "C", cp);
    if (!rows.is_array()) jio::fail(cp + ".C", "expected an array of rows");
    for (std::size_t i = 0; i < rows.size(); ++i) c.C.push_back(jio::read_floats(rows[i], cp + ".C[" + std::to_string(i) + "]"));
    c.d = jio::read_floats(jio::field(cls[k], "d", cp), cp + ".d");
    if (c.d.size() != c.C.size()) jio::fail(cp, "C and d differ in row count");
    p.clauses.push_back(std::move(c));
  }
  return p;
}

inline json write_property(const PropertySpec& p) { return bundle_detail::write_property(p); }

/// Parses and validates a bundle. Structural problems are ParseErrors with
/// a JSON path; graph problems are ValidationErrors.
inline ModelBundle load_bundle(const std::string& text, const std::string& path = "bundle") {
  const json j = jio::parse_text(text, path);
  jio::check_version(j, path);
  ModelBundle b;
  b.graph_id = jio::read_string(jio::field(j, "graph_id", path), path + ".graph_id");
  const auto& nodes = jio::field(j, "nodes", path);
  if (!nodes.is_array()) jio::fail(path + ".nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto np = path + ".nodes[" + std::to_string(i) + "]";
    Node n;
    n.id = jio::read_index(jio::field(nodes[i], "id", np), np + ".id");
    const auto& ps = jio::field(nodes[i], "parents", np);
    if (!ps.is_array()) jio::fail(np + ".parents", "expected an array");
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto p = jio::read_index(ps[k], np + ".parents[" + std::to_string(k) + "]");
      if (p >= nodes.size()) jio::fail(np + ".parents", "node " + std::to_string(n.id) + " references missing node " + std::to_string(p));
      n.parents.push_back(p);
    }
    n.kind = bundle_detail::read_kind(nodes[i], np);
    n.out_shape = jio::read_shape(jio::field(nodes[i], "out_shape", np), np + ".out_shape");
    b.graph.nodes.push_back(std::move(n));
  }
  b.graph.output_id = jio::read_index(jio::field(j, "output", path), path + ".output");
  const auto& params = jio::field(j, "params", path);
  if (!params.is_object()) jio::fail(path + ".params", "expected an object");
  for (const auto& [key, t] : params.items()) b.params.push(key, jio::read_tensor(t, path + ".params." + key));
  if (const auto* r = jio::opt_field(j, "input_region")) b.region = read_region(*r, b.graph, path + ".input_region");
  if (const auto* p = jio::opt_field(j, "property")) b.property = read_property(*p, path + ".property");
  if (const auto* m = jio::opt_field(j, "metadata")) {
    if (!m->is_object()) jio::fail(path + ".metadata", "expected an object");
    b.metadata = *m;
  }
  if (const auto* d = jio::opt_field(j, "data")) {
    const auto& ins = jio::field(*d, "inputs", path + ".data");
    if (!ins.is_array()) jio::fail(path + ".data.inputs", "expected an array");
    std::vector<Tensor<double>> ts;
    for (std::size_t i = 0; i < ins.size(); ++i) ts.push_back(jio::read_tensor(ins[i], path + ".data.inputs[" + std::to_string(i) + "]"));
    b.inputs = std::move(ts);
  }
  const auto g = b.validated();
  if (b.property) b.property->check_width(g.output().out_shape.size());
  return b;
}

/// Canonical text: sorted keys, hex floats with a decimal mirror.
inline std::string save_bundle(const ModelBundle& b) {
  json nodes = json::array();
  for (const auto& n : b.graph.nodes) nodes.push_back(bundle_detail::write_node(n));
  json params = json::object();
  for (const auto& [k, t] : b.params.entries()) params[k] = jio::write_tensor(t);
  json j{{"schema_version", kSchemaVersion}, {"graph_id", b.graph_id}, {"nodes", nodes},
         {"output", b.graph.output_id}, {"params", params}, {"metadata", b.metadata}};
  if (b.region) j["input_region"] = write_region(*b.region);
  if (b.property) j["property"] = write_property(*b.property);
  if (b.inputs) {
    json ins = json::array();
    for (const auto& t : *b.inputs) ins.push_back(jio::write_tensor(t));
    j["data"] = json{{"inputs", ins}};
  }
  return jio::dump(j);
}

inline ModelBundle load_bundle_file(const std::string& path) { return load_bundle(jio::read_file(path), path); }

}  // namespace nncert
