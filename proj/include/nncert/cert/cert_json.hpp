// SPDX-License-Identifier: Apache-2.0
//
// Certificate files. Affine coefficients are stored row-major, node size
// rows by flattened input dimension columns.

#pragma once

#include <string>

#include "nncert/bundle/bundle.hpp"
#include "nncert/cert/certificate.hpp"

namespace nncert {

namespace cert_json {

inline InputRegion read_region_loose(const json& j, const std::string& path) {
  if (!j.is_array()) jio::fail(path, "expected an array of boxes");
  InputRegion r;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto p = path + "[" + std::to_string(k) + "]";
    auto lo = jio::read_floats(jio::field(j[k], "lo", p), p + ".lo");
    auto hi = jio::read_floats(jio::field(j[k], "hi", p), p + ".hi");
    if (lo.size() != hi.size() || lo.empty()) jio::fail(p, "lo and hi must be non-empty and of equal length");
    const Shape s = Shape::vec(lo.size());
    r.push_back({Tensor<double>(s, std::move(lo)), Tensor<double>(s, std::move(hi))});
  }
  return r;
}

inline AffineForm read_form(const json& a, const json& b, std::size_t rows, const std::string& path) {
  auto coeffs = jio::read_floats(a, path);
  auto bias = jio::read_floats(b, path);
  AffineForm f;
  f.rows = bias.size();
  f.cols = rows == 0 || coeffs.size() % rows != 0 ? 0 : coeffs.size() / rows;
  f.coeffs = std::move(coeffs);
  f.bias = std::move(bias);
  f.err.assign(f.rows, 0.0);
  return f;
}

inline std::map<std::size_t, NodePayload> read_bounds(const json& j, const std::string& path) {
  if (!j.is_object()) jio::fail(path, "expected an object keyed by node id");
  std::map<std::size_t, NodePayload> out;
  for (const auto& [key, v] : j.items()) {
    const auto p = path + "." + key;
    std::size_t id = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || ptr != key.data() + key.size()) jio::fail(p, "node id key is not a non-negative integer");
    NodePayload np;
    np.lo = jio::read_floats(jio::field(v, "lo", p), p + ".lo");
    np.hi = jio::read_floats(jio::field(v, "hi", p), p + ".hi");
    const auto* aL = jio::opt_field(v, "aL");
    const auto* bL = jio::opt_field(v, "bL");
    const auto* aU = jio::opt_field(v, "aU");
    const auto* bU = jio::opt_field(v, "bU");
    if (aL && bL) np.lower = read_form(*aL, *bL, np.lo.size(), p + ".aL");
    if (aU && bU) np.upper = read_form(*aU, *bU, np.lo.size(), p + ".aU");
    if (const auto* a = jio::opt_field(v, "alpha")) np.alpha = jio::read_floats(*a, p + ".alpha");
    if (const auto* b = jio::opt_field(v, "beta")) {
      if (!b->is_array()) jio::fail(p + ".beta", "expected an array");
      std::vector<int> beta;
      for (std::size_t i = 0; i < b->size(); ++i) beta.push_back(static_cast<int>(jio::read_int((*b)[i], p + ".beta")));
      np.beta = std::move(beta);
    }
    out[id] = std::move(np);
  }
  return out;
}

inline json write_bounds(const std::map<std::size_t, NodePayload>& bounds) {
  json j = json::object();
  for (const auto& [id, p] : bounds) {
    json v{{"lo", jio::write_floats(p.lo)}, {"hi", jio::write_floats(p.hi)}};
    if (p.lower && p.upper) {
      v["aL"] = jio::write_floats(p.lower->coeffs);
      v["bL"] = jio::write_floats(p.lower->bias);
      v["aU"] = jio::write_floats(p.upper->coeffs);
      v["bU"] = jio::write_floats(p.upper->bias);
    }
    if (p.alpha) v["alpha"] = jio::write_floats(*p.alpha);
    if (p.beta) v["beta"] = *p.beta;
    j[std::to_string(id)] = std::move(v);
  }
  return j;
}

inline json write_region_flat(const InputRegion& r) { return write_region(r); }

}  // namespace cert_json

/// Parses a certificate; malformed JSON or field types are ParseErrors.
/// Semantic problems (ids, lengths, ranges) are left to the checker.
inline Certificate load_certificate(const std::string& text, const std::string& path = "certificate") {
  using namespace cert_json;
  const json j = jio::parse_text(text, path);
  jio::check_version(j, path);
  Certificate c;
  c.graph_id = jio::read_string(jio::field(j, "graph_id", path), path + ".graph_id");
  c.region = read_region_loose(jio::field(j, "input_region", path), path + ".input_region");
  c.bounds = read_bounds(jio::field(j, "bounds", path), path + ".bounds");
  if (const auto* ls = jio::opt_field(j, "leaves")) {
    if (!ls->is_array()) jio::fail(path + ".leaves", "expected an array");
    for (std::size_t k = 0; k < ls->size(); ++k) {
      const auto p = path + ".leaves[" + std::to_string(k) + "]";
      const json& l = (*ls)[k];
      LeafCertificate leaf;
      leaf.region = read_region_loose(jio::field(l, "input_region", p), p + ".input_region");
      leaf.bounds = read_bounds(jio::field(l, "bounds", p), p + ".bounds");
      leaf.objective = jio::read_floats(jio::field(l, "objective", p), p + ".objective");
      leaf.claimed_lower_bound = jio::read_float(jio::field(l, "claimed_lower_bound", p), p + ".claimed_lower_bound");
      leaf.threshold = jio::read_float(jio::field(l, "threshold", p), p + ".threshold");
      c.leaves.push_back(std::move(leaf));
    }
  }
  if (const auto* g = jio::opt_field(j, "goal")) {
    const auto p = path + ".goal";
    const auto kind = jio::read_string(jio::field(*g, "kind", p), p + ".kind");
    Goal goal;
    if (kind == "margin") {
      goal.kind = Goal::Kind::margin;
      goal.label = jio::read_index(jio::field(*g, "label", p), p + ".label");
    } else if (kind == "unsat") {
      goal.kind = Goal::Kind::unsat;
    } else if (kind == "objective") {
      goal.kind = Goal::Kind::objective;
      goal.objective = jio::read_floats(jio::field(*g, "objective", p), p + ".objective");
      goal.threshold = jio::read_float(jio::field(*g, "threshold", p), p + ".threshold");
    } else {
      jio::fail(p + ".kind", "unknown goal kind '" + kind + "'");
    }
    c.goal = goal;
  }
  return c;
}

inline std::string save_certificate(const Certificate& c) {
  using namespace cert_json;
  json j{{"schema_version", kSchemaVersion}, {"graph_id", c.graph_id}, {"input_region", write_region(c.region)},
         {"bounds", write_bounds(c.bounds)}};
  if (!c.leaves.empty()) {
    json ls = json::array();
    for (const auto& l : c.leaves) {
      ls.push_back(json{{"input_region", write_region(l.region)},
                        {"bounds", write_bounds(l.bounds)},
                        {"objective", jio::write_floats(l.objective)},
                        {"claimed_lower_bound", jio::write_float(l.claimed_lower_bound)},
                        {"threshold", jio::write_float(l.threshold)}});
    }
    j["leaves"] = ls;
  }
  if (c.goal) {
    json g;
    switch (c.goal->kind) {
      case Goal::Kind::margin: g = json{{"kind", "margin"}, {"label", c.goal->label}}; break;
      case Goal::Kind::unsat: g = json{{"kind", "unsat"}}; break;
      case Goal::Kind::objective:
        g = json{{"kind", "objective"}, {"objective", jio::write_floats(c.goal->objective)},
                 {"threshold", jio::write_float(c.goal->threshold)}};
        break;
    }
    j["goal"] = g;
  }
  return jio::dump(j);
}

inline json report_json(const CheckReport& r) {
  json j{{"verdict", r.accepted ? "accepted" : "rejected"}};
  if (!r.accepted) {
    j["reason"] = to_string(r.reason);
    j["node"] = r.node ? json(*r.node) : json(nullptr);
    j["field"] = r.field;
    j["expected"] = r.expected;
    j["provided"] = r.provided;
    j["detail"] = r.detail;
  }
  return j;
}

}  // namespace nncert
