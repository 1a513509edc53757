#pragma once

#include "cqap/bound.hpp"
#include "cqap/varset.hpp"

#include <string>
#include <vector>

namespace cqap {

// (X, Y, N_{Y|X}) with X a proper subset of Y. `guard` names the relation
// (or "Q" for the access request) that guards it.
struct DegreeConstraint {
  VarSet x;
  VarSet y;
  SymbolicBound bound;
  std::string guard;
  int atom = -1;  // guarding atom index, -1 for the access request

  bool is_cardinality() const { return x.empty(); }
};

struct Atom {
  std::string relation;
  std::vector<int> vars;  // as written, may repeat
  VarSet varset;
};

// A node of a user supplied PMTD, listed in preorder with parent links.
struct PmtdSpecNode {
  VarSet bag;
  bool materialized = false;
  int parent = -1;
};

struct Cqap {
  std::string name;
  std::vector<std::string> var_names;
  std::vector<Atom> atoms;
  VarSet head;    // normalized: always contains access
  VarSet access;
  std::vector<DegreeConstraint> dc;
  std::vector<DegreeConstraint> ac;
  std::vector<std::vector<PmtdSpecNode>> pmtd_specs;

  int n() const { return static_cast<int>(var_names.size()); }
  VarSet all_vars() const { return VarSet::full(n()); }
  int var_index(const std::string& name) const;

  // "134" when every variable is x<digit>, otherwise "x1,y".
  std::string set_label(VarSet s) const;
  std::vector<std::string> set_names(VarSet s) const;

  // Cardinality constraint (empty, A, |Q_A|).
  const DegreeConstraint& access_cardinality() const;
};

// (X, Y|X, N_{Z|empty}) with nonempty X strictly inside Y, Y inside Z.
struct SplitConstraint {
  VarSet x;
  VarSet y;
  VarSet z;
  SymbolicBound bound;
  int atom = -1;
};

Cqap parse_query(const std::string& text);
Cqap load_query(const std::string& path);
std::string print_query(const Cqap& q);

// Every split constraint spanned by the cardinality constraints in dc, one per
// (X, Y) pair keeping the smallest bound under `assignment`.
std::vector<SplitConstraint> span_split_constraints(const std::vector<DegreeConstraint>& dc,
                                                    const BoundAssignment& assignment);

// Keeps one constraint per (x, y) pair, the one with the smallest bound.
std::vector<DegreeConstraint> best_constraints(const std::vector<DegreeConstraint>& dc,
                                               const BoundAssignment& assignment);

}  // namespace cqap
