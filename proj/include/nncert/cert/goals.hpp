// SPDX-License-Identifier: Apache-2.0
//
// Goal reductions discharged from certified bounds.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nncert/core/error.hpp"
#include "nncert/scalars/real_interval.hpp"

namespace nncert {

/// lower(z_label) > max_{k != label} upper(z_k).
inline bool check_margin(std::span<const double> lo, std::span<const double> hi, std::size_t label) {
  if (lo.size() != hi.size()) throw TypingError("margin: lo/hi length mismatch");
  if (label >= lo.size()) throw TypingError("margin: label " + std::to_string(label) + " out of range");
  for (std::size_t k = 0; k < hi.size(); ++k) {
    if (k != label && !(lo[label] > hi[k])) return false;
  }
  return true;
}

/// One clause: conjunction of rows C y <= d. A counterexample satisfies
/// some clause.
struct Clause {
  std::vector<std::vector<double>> C;
  std::vector<double> d;
};

struct PropertySpec {
  std::vector<Clause> clauses;

  void check_width(std::size_t out) const {
    for (const auto& cl : clauses) {
      if (cl.C.size() != cl.d.size()) throw TypingError("property: C and d differ in row count");
      for (const auto& row : cl.C) {
        if (row.size() != out) {
          throw TypingError("property: row width " + std::to_string(row.size()) + " vs output size " +
                            std::to_string(out));
        }
      }
    }
  }
};

enum class UnsatVerdict { safe, unknown };

inline const char* to_string(UnsatVerdict v) { return v == UnsatVerdict::safe ? "safe" : "unknown"; }

/// Sound lower bound of <c, y> over y in the box [lo, hi].
inline double box_lower(std::span<const double> c, std::span<const double> lo, std::span<const double> hi) {
  if (c.size() != lo.size() || lo.size() != hi.size()) throw TypingError("box_lower: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    acc = directed::add_down(acc, directed::mul_down(c[i], c[i] > 0 ? lo[i] : hi[i]));
  }
  return acc;
}

/// Safe iff every clause has a row whose certified lower bound of
/// (C y - d)_i is strictly positive. `lower_of(c)` must return a sound
/// lower bound of <c, y> over the region.
inline UnsatVerdict check_unsat(const PropertySpec& prop, std::size_t out_size,
                                const std::function<double(std::span<const double>)>& lower_of) {
  prop.check_width(out_size);
  for (const auto& cl : prop.clauses) {
    bool refuted = false;
    for (std::size_t i = 0; i < cl.C.size() && !refuted; ++i) {
      refuted = directed::sub_down(lower_of(cl.C[i]), cl.d[i]) > 0.0;
    }
    if (!refuted) return UnsatVerdict::unknown;
  }
  return UnsatVerdict::safe;
}

inline UnsatVerdict check_unsat_box(const PropertySpec& prop, std::span<const double> lo, std::span<const double> hi) {
  return check_unsat(prop, lo.size(), [&](std::span<const double> c) { return box_lower(c, lo, hi); });
}

/// V >= 0 and dV/dt <= -rho over the region.
inline bool check_lyapunov(const RealInterval& v, const RealInterval& vdot, double rho) {
  if (!(rho >= 0.0)) throw DomainError("lyapunov: rho must be >= 0");
  return v.lo >= 0.0 && vdot.hi <= -rho;
}

/// Residual as a sum of coeff * product of named factors.
struct ResidualTerm {
  double coeff;
  std::vector<std::string> factors;
};

using ResidualExpr = std::vector<ResidualTerm>;

inline RealInterval residual_interval(const std::map<std::string, RealInterval>& bounds, const ResidualExpr& expr) {
  RealInterval acc = RealInterval::point(0.0);
  for (const auto& t : expr) {
    RealInterval prod = RealInterval::point(t.coeff);
    for (const auto& f : t.factors) {
      auto it = bounds.find(f);
      if (it == bounds.end()) throw Error("residual: missing bound for term '" + f + "'");
      prod = interval::mul(prod, it->second);
    }
    acc = interval::add(acc, prod);
  }
  return acc;
}

/// The residual interval lies in [-eps, eps].
inline bool check_residual(const std::map<std::string, RealInterval>& bounds, const ResidualExpr& expr, double eps) {
  const auto r = residual_interval(bounds, expr);
  return -eps <= r.lo && r.hi <= eps;
}

/// u_t + u u_x - nu u_xx
inline ResidualExpr burgers_residual(double nu) {
  return {{1.0, {"u_t"}}, {1.0, {"u", "u_x"}}, {-nu, {"u_xx"}}};
}

struct AxisBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

enum class Coverage { covered, gap, unsupported };

inline constexpr std::size_t kMaxCoverageDims = 16;

namespace coverage_detail {

inline bool intersects(const AxisBox& a, const AxisBox& b) {
  for (std::size_t j = 0; j < a.lo.size(); ++j) {
    if (a.hi[j] < b.lo[j] || b.hi[j] < a.lo[j]) return false;
  }
  return true;
}

inline bool contains(const AxisBox& outer, const AxisBox& inner) {
  for (std::size_t j = 0; j < inner.lo.size(); ++j) {
    if (inner.lo[j] < outer.lo[j] || outer.hi[j] < inner.hi[j]) return false;
  }
  return true;
}

// A box is covered iff some leaf contains it, or it splits at a leaf face
// lying strictly inside it into two covered halves. With no such face
// every touching leaf meets only the boundary, so the relative interior
// is uncovered.
inline bool covered(const AxisBox& box, const std::vector<const AxisBox*>& leaves) {
  std::vector<const AxisBox*> hit;
  for (const auto* l : leaves) {
    if (!intersects(box, *l)) continue;
    if (contains(*l, box)) return true;
    hit.push_back(l);
  }
  for (const auto* l : hit) {
    for (std::size_t j = 0; j < box.lo.size(); ++j) {
      for (double cut : {l->lo[j], l->hi[j]}) {
        if (box.lo[j] < cut && cut < box.hi[j]) {
          AxisBox left = box, right = box;
          left.hi[j] = cut;
          right.lo[j] = cut;
          return covered(left, hit) && covered(right, hit);
        }
      }
    }
  }
  return false;
}

}  // namespace coverage_detail

/// Whether the union of closed leaf boxes covers the root box.
inline Coverage check_coverage(const AxisBox& root, const std::vector<AxisBox>& leaves) {
  const auto dims = root.lo.size();
  if (root.hi.size() != dims) throw TypingError("coverage: malformed root box");
  for (const auto& l : leaves) {
    if (l.lo.size() != dims || l.hi.size() != dims) throw TypingError("coverage: leaf dimension mismatch");
    for (std::size_t j = 0; j < dims; ++j) {
      if (!(l.lo[j] <= l.hi[j])) throw TypingError("coverage: leaf with lo > hi");
    }
  }
  if (dims > kMaxCoverageDims) return Coverage::unsupported;
  std::vector<const AxisBox*> ptrs;
  for (const auto& l : leaves) ptrs.push_back(&l);
  return coverage_detail::covered(root, ptrs) ? Coverage::covered : Coverage::gap;
}

/// Coverage plus every leaf's own verdict.
inline bool check_leaves(const AxisBox& root, const std::vector<AxisBox>& leaves, const std::vector<bool>& verdicts) {
  if (verdicts.size() != leaves.size()) throw TypingError("leaves: verdict count mismatch");
  if (check_coverage(root, leaves) != Coverage::covered) return false;
  return std::all_of(verdicts.begin(), verdicts.end(), [](bool v) { return v; });
}

}  // namespace nncert
