// SPDX-License-Identifier: Apache-2.0
//
// Bound certificates: per-node boxes, affine forms and relu relaxation
// parameters on the binary32 grid. The producer folds the affine step
// followed by grid quantization over the graph; the checker runs the same
// fold from the provided parent payloads and demands bit equality.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nncert/bounds/crown.hpp"
#include "nncert/cert/goals.hpp"
#include "nncert/scalars/literal.hpp"

namespace nncert {

struct NodePayload {
  std::vector<double> lo;
  std::vector<double> hi;
  /// Both present or both absent. Absent forms stand for the constant
  /// forms of the box.
  std::optional<AffineForm> lower;
  std::optional<AffineForm> upper;
  std::optional<std::vector<double>> alpha;
  std::optional<std::vector<int>> beta;
};

struct Goal {
  enum class Kind { margin, unsat, objective } kind = Kind::margin;
  std::size_t label = 0;
  std::vector<double> objective;
  double threshold = 0.0;
};

struct LeafCertificate {
  InputRegion region;
  std::map<std::size_t, NodePayload> bounds;
  std::vector<double> objective;
  double claimed_lower_bound = 0.0;
  double threshold = 0.0;
};

struct Certificate {
  std::string graph_id;
  InputRegion region;
  std::map<std::size_t, NodePayload> bounds;
  std::vector<LeafCertificate> leaves;
  std::optional<Goal> goal;
};

enum class Reason { none, schema, topo_order, phase, bound_mismatch, goal };

inline const char* to_string(Reason r) {
  switch (r) {
    case Reason::none: return "none";
    case Reason::schema: return "schema";
    case Reason::topo_order: return "topo-order";
    case Reason::phase: return "phase";
    case Reason::bound_mismatch: return "bound-mismatch";
    case Reason::goal: return "goal";
  }
  return "?";
}

struct CheckReport {
  bool accepted = true;
  Reason reason = Reason::none;
  std::optional<std::size_t> node;
  std::string field;
  std::string expected;
  std::string provided;
  std::string detail;

  static CheckReport accept() { return {}; }
  static CheckReport reject(Reason r, std::optional<std::size_t> node, std::string detail, std::string field = {},
                            std::string expected = {}, std::string provided = {}) {
    return {false, r, node, std::move(field), std::move(expected), std::move(provided), std::move(detail)};
  }
};

namespace cert_detail {

/// Grid value with -0 folded into +0.
inline double canon(double x) {
  const double r = fp32_round(x, RoundingMode::nearest_even);
  return r == 0.0 ? 0.0 : r;
}

inline double round_dir(double x, RoundingMode m) {
  const double r = fp32_round(x, m);
  return r == 0.0 ? 0.0 : r;
}

inline std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

inline std::string show(double x) { return format_hex32(fp32_bits(x)) + " (" + format_fp32_decimal(x) + ")"; }

/// Rounds a lower (down = true) or upper form onto the grid. Coefficients
/// go to nearest; the bias absorbs the tracked error and sum |da_j| max|x_j|
/// outward, so the grid form is sound as written.
inline bool quantize_form(AffineForm& f, const FlatBox& box, bool down) {
  for (std::size_t r = 0; r < f.rows; ++r) {
    double* a = f.row(r);
    double shift = f.err[r];
    for (std::size_t j = 0; j < f.cols; ++j) {
      const double q = canon(a[j]);
      if (!std::isfinite(q)) return false;
      const double da = std::fabs(q - a[j]);  // exact: both on nearby binary64 values
      if (da != 0.0) shift = directed::add_up(shift, directed::mul_up(da, box.mag[j]));
      a[j] = q;
    }
    const double b = down ? directed::sub_down(f.bias[r], shift) : directed::add_up(f.bias[r], shift);
    f.bias[r] = round_dir(b, down ? RoundingMode::toward_neg_inf : RoundingMode::toward_pos_inf);
    f.err[r] = 0.0;
    if (!std::isfinite(f.bias[r])) return false;
  }
  return true;
}

/// Grid version of one node's bounds. Forms that leave the finite grid
/// are replaced by the constant forms of the quantized box.
inline NodeBounds quantize(NodeBounds b, const FlatBox& box) {
  for (auto& v : b.lo) v = round_dir(v, RoundingMode::toward_neg_inf);
  for (auto& v : b.hi) v = round_dir(v, RoundingMode::toward_pos_inf);
  if (!quantize_form(b.lower, box, true) || !quantize_form(b.upper, box, false)) {
    b.lower = AffineForm::constant(b.lo, box.lo.size());
    b.upper = AffineForm::constant(b.hi, box.lo.size());
  }
  return b;
}

inline NodeBounds without_forms(NodeBounds b, std::size_t cols) {
  b.lower = AffineForm::constant(b.lo, cols);
  b.upper = AffineForm::constant(b.hi, cols);
  return b;
}

inline InputRegion canon_region(const InputRegion& r) {
  InputRegion out;
  for (const auto& b : r) out.push_back({b.lo.map(canon), b.hi.map(canon)});
  return out;
}

inline NodeBounds from_payload(const NodePayload& p, bool input_dependent, std::size_t cols) {
  NodeBounds b;
  b.lo = p.lo;
  b.hi = p.hi;
  b.lower = p.lower ? *p.lower : AffineForm::constant(p.lo, cols);
  b.upper = p.upper ? *p.upper : AffineForm::constant(p.hi, cols);
  b.lower.err.assign(b.lower.rows, 0.0);
  b.upper.err.assign(b.upper.rows, 0.0);
  b.input_dependent = input_dependent;
  return b;
}

inline NodePayload to_payload(const NodeBounds& b, bool with_forms) {
  NodePayload p;
  p.lo = b.lo;
  p.hi = b.hi;
  if (with_forms) {
    p.lower = b.lower;
    p.upper = b.upper;
  }
  return p;
}

inline bool depends_on_input(const Node& n, const std::vector<bool>& dep) {
  if (n.kind.tag() == OpTag::input) return true;
  for (auto q : n.parents) {
    if (dep[q]) return true;
  }
  return false;
}

/// One fold step: leaf bounds or crown_step, then grid quantization.
inline NodeBounds replay_step(const WellTypedGraph& g, const Node& n, const ParamStore<double>& params,
                              const InputRegion& region, const FlatBox& box, const std::vector<NodeBounds>& all,
                              const RelaxParams& relax, bool with_forms) {
  NodeBounds b = crown_detail::is_leaf(n) ? leaf_bounds(g, n, params, region, box)
                                          : crown_step(g, n, all, box, relax);
  b = quantize(std::move(b), box);
  return with_forms ? b : without_forms(std::move(b), box.lo.size());
}

}  // namespace cert_detail

struct ProduceOptions {
  RelaxParams relax;
  bool with_forms = true;
};

/// Certificate for the given region from this artifact's own affine pass.
/// Relu nodes record the alpha actually used for every unit.
inline Certificate produce_certificate(const WellTypedGraph& g, const ParamStore<double>& params,
                                       const InputRegion& region_in, const std::string& graph_id,
                                       const ProduceOptions& opt = {}) {
  using namespace cert_detail;
  Certificate c;
  c.graph_id = graph_id;
  c.region = canon_region(region_in);
  const FlatBox box = FlatBox::from(c.region);
  if (box.lo.size() != g.input_dim()) throw TypingError("input region does not match graph inputs");
  RelaxParams relax;
  relax.beta = opt.relax.beta;
  std::vector<NodeBounds> all;
  for (const Node& n : g.nodes()) {
    if (n.kind.tag() == OpTag::relu) {
      std::vector<double> alpha(n.out_shape.size());
      auto given = opt.relax.alpha.find(n.id);
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        alpha[i] = canon(given != opt.relax.alpha.end() ? given->second.at(i) : kDefaultAlpha);
      }
      relax.alpha[n.id] = alpha;
    }
    try {
      all.push_back(replay_step(g, n, params, c.region, box, all, relax, opt.with_forms));
    } catch (const DomainError& e) {
      throw EvalError(n.id, e.what());
    }
    NodePayload p = to_payload(all.back(), opt.with_forms);
    if (auto it = relax.alpha.find(n.id); it != relax.alpha.end()) p.alpha = it->second;
    if (auto it = relax.beta.find(n.id); it != relax.beta.end()) p.beta = it->second;
    c.bounds[n.id] = std::move(p);
  }
  return c;
}

/// Output-node bounds of a certificate payload set as NodeBounds.
inline NodeBounds payload_bounds(const NodePayload& p, std::size_t cols) {
  return cert_detail::from_payload(p, true, cols);
}

/// Grid lower bound of <c, y> from an output payload over a region.
inline double certified_objective(const NodePayload& out, std::span<const double> c, const InputRegion& region) {
  const FlatBox box = FlatBox::from(region);
  const double v = objective_lower_bound(payload_bounds(out, box.lo.size()), c, box);
  return cert_detail::round_dir(v, RoundingMode::toward_neg_inf);
}

/// Adds one branch-and-bound leaf for a sub-region with its objective.
inline LeafCertificate produce_leaf(const WellTypedGraph& g, const ParamStore<double>& params,
                                    const InputRegion& region, std::vector<double> objective, double threshold,
                                    const ProduceOptions& opt = {}) {
  auto sub = produce_certificate(g, params, region, "", opt);
  LeafCertificate leaf;
  leaf.region = std::move(sub.region);
  leaf.bounds = std::move(sub.bounds);
  leaf.claimed_lower_bound = certified_objective(leaf.bounds.at(g.output_id()), objective, leaf.region);
  leaf.objective = std::move(objective);
  leaf.threshold = cert_detail::canon(threshold);
  return leaf;
}

namespace cert_detail {

inline CheckReport check_schema(const WellTypedGraph& g, const InputRegion& region,
                                const std::map<std::size_t, NodePayload>& bounds) {
  if (region.size() != g.inputs().size()) {
    return CheckReport::reject(Reason::schema, std::nullopt,
                               "input_region has " + std::to_string(region.size()) + " boxes, graph has " +
                                   std::to_string(g.inputs().size()) + " inputs");
  }
  for (std::size_t k = 0; k < region.size(); ++k) {
    const auto& in = g.node(g.inputs()[k]);
    const auto& b = region[k];
    if (b.lo.size() != in.out_shape.size() || b.hi.size() != in.out_shape.size()) {
      return CheckReport::reject(Reason::schema, in.id, "input box length does not match input shape");
    }
    for (std::size_t i = 0; i < b.lo.size(); ++i) {
      if (!(b.lo[i] <= b.hi[i])) return CheckReport::reject(Reason::schema, in.id, "input box with lo > hi");
    }
  }
  const auto N = g.input_dim();
  for (const auto& [id, p] : bounds) {
    if (id >= g.size()) return CheckReport::reject(Reason::schema, id, "unknown node id");
    const auto& n = g.node(id);
    const auto size = n.out_shape.size();
    if (p.lo.size() != size || p.hi.size() != size) {
      return CheckReport::reject(Reason::schema, id, "lo/hi length does not match node size " + std::to_string(size));
    }
    if (p.lower.has_value() != p.upper.has_value()) {
      return CheckReport::reject(Reason::schema, id, "lower and upper forms must be given together");
    }
    if (p.lower) {
      for (const auto* f : {&*p.lower, &*p.upper}) {
        if (f->rows != size || f->cols != N || f->coeffs.size() != size * N || f->bias.size() != size) {
          return CheckReport::reject(Reason::schema, id, "affine form dimensions do not match node size x input dim");
        }
      }
    }
    if ((p.alpha || p.beta) && n.kind.tag() != OpTag::relu) {
      return CheckReport::reject(Reason::schema, id, "alpha/beta given for a non-relu node");
    }
    if (p.alpha) {
      if (p.alpha->size() != size) return CheckReport::reject(Reason::schema, id, "alpha length mismatch");
      for (double a : *p.alpha) {
        if (!(a >= 0.0 && a <= 1.0)) return CheckReport::reject(Reason::schema, id, "alpha outside [0,1]");
      }
    }
    if (p.beta) {
      if (p.beta->size() != size) return CheckReport::reject(Reason::schema, id, "beta length mismatch");
      for (int b : *p.beta) {
        if (b < -1 || b > 1) return CheckReport::reject(Reason::schema, id, "beta outside {-1,0,1}");
      }
    }
  }
  if (!bounds.count(g.output_id())) {
    return CheckReport::reject(Reason::schema, g.output_id(), "no payload for the output node");
  }
  return CheckReport::accept();
}

inline CheckReport compare(std::size_t id, const char* field, std::span<const double> want,
                           std::span<const double> got) {
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (bits(want[i]) != bits(got[i])) {
      return CheckReport::reject(Reason::bound_mismatch, id, "recomputed value differs", std::string(field) + "[" + std::to_string(i) + "]",
                                 show(want[i]), show(got[i]));
    }
  }
  return CheckReport::accept();
}

inline CheckReport compare_payload(std::size_t id, const NodeBounds& want, const NodePayload& got) {
  for (auto r : {compare(id, "lo", want.lo, got.lo), compare(id, "hi", want.hi, got.hi)}) {
    if (!r.accepted) return r;
  }
  if (got.lower) {
    for (auto r : {compare(id, "aL", want.lower.coeffs, got.lower->coeffs),
                   compare(id, "bL", want.lower.bias, got.lower->bias),
                   compare(id, "aU", want.upper.coeffs, got.upper->coeffs),
                   compare(id, "bU", want.upper.bias, got.upper->bias)}) {
      if (!r.accepted) return r;
    }
  }
  return CheckReport::accept();
}

inline NodePayload canon_payload(const NodePayload& p) {
  auto cv = [](std::vector<double> v) {
    for (auto& x : v) x = canon(x);
    return v;
  };
  auto cf = [&](AffineForm f) {
    f.coeffs = cv(std::move(f.coeffs));
    f.bias = cv(std::move(f.bias));
    return f;
  };
  NodePayload q = p;
  q.lo = cv(p.lo);
  q.hi = cv(p.hi);
  if (p.lower) q.lower = cf(*p.lower);
  if (p.upper) q.upper = cf(*p.upper);
  if (p.alpha) q.alpha = cv(*p.alpha);
  return q;
}

}  // namespace cert_detail

/// Replays the per-node payloads over a region. Never throws on bad
/// payloads; every failure is a rejection.
inline CheckReport check_bounds(const WellTypedGraph& g, const ParamStore<double>& params, const InputRegion& region_in,
                                const std::map<std::size_t, NodePayload>& bounds_in) {
  using namespace cert_detail;
  std::map<std::size_t, NodePayload> bounds;
  InputRegion region;
  try {
    if (auto r = check_schema(g, region_in, bounds_in); !r.accepted) return r;
    region = canon_region(region_in);
    for (const auto& [id, p] : bounds_in) bounds[id] = canon_payload(p);
  } catch (const Error& e) {
    return CheckReport::reject(Reason::schema, std::nullopt, e.what());
  }
  const FlatBox box = FlatBox::from(region);
  std::vector<NodeBounds> all(g.size());
  std::vector<bool> dep(g.size(), false);
  RelaxParams relax;
  for (const Node& n : g.nodes()) {
    auto it = bounds.find(n.id);
    if (it == bounds.end()) continue;
    for (auto q : n.parents) {
      if (!bounds.count(q)) {
        return CheckReport::reject(Reason::topo_order, n.id,
                                   "parent " + std::to_string(q) + " has no payload before its use");
      }
    }
    const NodePayload& p = it->second;
    dep[n.id] = depends_on_input(n, dep);
    if (p.alpha) relax.alpha[n.id] = *p.alpha;
    if (p.beta) relax.beta[n.id] = *p.beta;
    NodeBounds want;
    try {
      want = replay_step(g, n, params, region, box, all, relax, p.lower.has_value());
    } catch (const PhaseError& e) {
      return CheckReport::reject(Reason::phase, n.id, e.what());
    } catch (const Error& e) {
      return CheckReport::reject(Reason::schema, n.id, e.what());
    }
    if (auto r = compare_payload(n.id, want, p); !r.accepted) return r;
    all[n.id] = from_payload(p, dep[n.id], box.lo.size());
  }
  for (const Node& n : g.nodes()) {
    if (!bounds.count(n.id)) {
      return CheckReport::reject(Reason::schema, n.id, "no payload for node");
    }
  }
  return CheckReport::accept();
}

/// Full check: root payloads, optional goal on the output, and leaves
/// (replay, claimed bound, threshold, coverage of the root region).
inline CheckReport check_certificate(const WellTypedGraph& g, const ParamStore<double>& params, const Certificate& c,
                                     const std::optional<std::string>& expected_graph_id = std::nullopt,
                                     const std::optional<PropertySpec>& property = std::nullopt) {
  using namespace cert_detail;
  if (expected_graph_id && c.graph_id != *expected_graph_id) {
    return CheckReport::reject(Reason::schema, std::nullopt, "graph_id mismatch", "graph_id", *expected_graph_id,
                               c.graph_id);
  }
  if (auto r = check_bounds(g, params, c.region, c.bounds); !r.accepted) return r;
  const auto out_id = g.output_id();
  const NodePayload out = canon_payload(c.bounds.at(out_id));
  const InputRegion root = canon_region(c.region);

  if (c.goal) {
    const Goal& goal = *c.goal;
    try {
      switch (goal.kind) {
        case Goal::Kind::margin:
          if (!check_margin(out.lo, out.hi, goal.label)) {
            return CheckReport::reject(Reason::goal, out_id, "margin not certified for label " + std::to_string(goal.label));
          }
          break;
        case Goal::Kind::unsat: {
          if (!property) return CheckReport::reject(Reason::goal, out_id, "unsat goal without a property");
          const FlatBox box = FlatBox::from(root);
          const NodeBounds ob = payload_bounds(out, box.lo.size());
          auto lower_of = [&](std::span<const double> row) { return objective_lower_bound(ob, row, box); };
          if (check_unsat(*property, out.lo.size(), lower_of) != UnsatVerdict::safe) {
            return CheckReport::reject(Reason::goal, out_id, "property not refuted by the certified bounds");
          }
          break;
        }
        case Goal::Kind::objective: {
          const double lb = certified_objective(out, goal.objective, root);
          if (!(lb >= canon(goal.threshold))) {
            return CheckReport::reject(Reason::goal, out_id, "objective bound below threshold", "objective",
                                       ">= " + show(canon(goal.threshold)), show(lb));
          }
          break;
        }
      }
    } catch (const Error& e) {
      return CheckReport::reject(Reason::schema, out_id, e.what());
    }
  }

  if (c.leaves.empty()) return CheckReport::accept();
  std::vector<AxisBox> leaf_boxes;
  for (std::size_t k = 0; k < c.leaves.size(); ++k) {
    const auto& leaf = c.leaves[k];
    const std::string tag = "leaf " + std::to_string(k) + ": ";
    auto r = check_bounds(g, params, leaf.region, leaf.bounds);
    if (!r.accepted) {
      r.detail = tag + r.detail;
      return r;
    }
    const InputRegion lr = canon_region(leaf.region);
    double lb = 0.0;
    try {
      lb = certified_objective(canon_payload(leaf.bounds.at(out_id)), leaf.objective, lr);
    } catch (const Error& e) {
      return CheckReport::reject(Reason::schema, out_id, tag + e.what());
    }
    const double claimed = canon(leaf.claimed_lower_bound);
    if (bits(claimed) != bits(lb)) {
      return CheckReport::reject(Reason::bound_mismatch, out_id, tag + "claimed lower bound differs from replay",
                                 "claimed_lower_bound", show(lb), show(claimed));
    }
    if (!(claimed >= canon(leaf.threshold))) {
      return CheckReport::reject(Reason::goal, out_id, tag + "claimed lower bound below threshold",
                                 "threshold", ">= " + show(canon(leaf.threshold)), show(claimed));
    }
    auto [lo, hi] = flat_region(lr);
    leaf_boxes.push_back({lo, hi});
  }
  auto [rlo, rhi] = flat_region(root);
  switch (check_coverage({rlo, rhi}, leaf_boxes)) {
    case Coverage::covered: return CheckReport::accept();
    case Coverage::gap: return CheckReport::reject(Reason::goal, std::nullopt, "leaves do not cover the input region");
    case Coverage::unsupported:
      return CheckReport::reject(Reason::goal, std::nullopt, "coverage-check-unsupported");
  }
  return CheckReport::accept();
}

}  // namespace nncert
