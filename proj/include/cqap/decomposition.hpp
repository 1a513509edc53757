#pragma once

#include "cqap/query.hpp"
#include "cqap/varset.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cqap {

// Rooted tree over bags; parent[root] = -1.
struct TreeDecomp {
  std::vector<VarSet> bags;
  std::vector<int> parent;
  int root = 0;

  int size() const { return static_cast<int>(bags.size()); }
  std::vector<std::vector<int>> children() const;
  // Nodes in preorder from the root, children in canonical order.
  std::vector<int> preorder() const;
  bool is_ancestor(int a, int t) const;  // a is a proper ancestor of t
  // Topmost node whose bag contains v, or -1.
  int top(int v) const;
  VarSet vars() const;
};

// Tree shape plus running intersection plus coverage of every edge.
bool is_tree_decomposition(const TreeDecomp& d, const std::vector<VarSet>& edges);

bool is_free_connex(const TreeDecomp& d, VarSet head);

// The view schemas of every node given the materialization set.
std::vector<VarSet> compute_nu(const TreeDecomp& d, const std::vector<bool>& m, VarSet head);

struct Pmtd {
  TreeDecomp decomp;
  std::vector<bool> m;
  std::vector<VarSet> nu;

  bool materialized(int t) const { return m[t]; }
};

Pmtd make_pmtd(const TreeDecomp& d, const std::vector<bool>& m, VarSet head);

// Structural checks: free-connex, access inside the root, M closed downward.
bool is_valid_pmtd(const Pmtd& p, VarSet head, VarSet access);

bool check_redundancy(const Pmtd& p);
// True when p1 is dominated by p2.
bool check_domination(const Pmtd& p1, const Pmtd& p2);

// Antichain-induced PMTDs with the materialized subtrees merged, plus M = empty.
std::vector<Pmtd> induced_pmtds(const TreeDecomp& d, VarSet head, VarSet access);

// Edges of the access query: every atom plus the access set.
std::vector<VarSet> access_edges(const Cqap& q);

// Distinct non-redundant free-connex decompositions rooted at a bag holding A,
// built from elimination orders and every junction tree of the resulting bags.
std::vector<TreeDecomp> enumerate_decompositions(const Cqap& q, int max_bag, std::size_t cap = 200000);

// Non-redundant PMTDs of bags up to max_bag, minus those dominating another.
std::vector<Pmtd> enumerate_pmtd_set(const Cqap& q, int max_bag, std::size_t cap = 200000);

// PMTDs given in the query file, or the enumerated set when there are none.
std::vector<Pmtd> query_pmtds(const Cqap& q, int max_bag);
std::vector<Pmtd> pmtds_from_specs(const Cqap& q);

// Canonical text such as "(T134, S13)" listing views in preorder.
std::string pmtd_label(const Pmtd& p, const Cqap& q);
// Canonical structural key used for deduplication and ordering.
std::string pmtd_key(const Pmtd& p);

nlohmann::json pmtd_to_json(const Pmtd& p, const Cqap& q);
Pmtd pmtd_from_json(const nlohmann::json& j, const Cqap& q);

}  // namespace cqap
