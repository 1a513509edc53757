#include "cqap/decomposition.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace cqap {

std::vector<std::vector<int>> TreeDecomp::children() const {
  std::vector<std::vector<int>> ch(bags.size());
  for (int t = 0; t < size(); ++t)
    if (parent[t] >= 0) ch[parent[t]].push_back(t);
  return ch;
}

std::vector<int> TreeDecomp::preorder() const {
  auto ch = children();
  std::vector<int> out;
  std::function<void(int)> go = [&](int t) {
    out.push_back(t);
    for (int c : ch[t]) go(c);
  };
  if (!bags.empty()) go(root);
  return out;
}

bool TreeDecomp::is_ancestor(int a, int t) const {
  for (int p = parent[t]; p >= 0; p = parent[p])
    if (p == a) return true;
  return false;
}

int TreeDecomp::top(int v) const {
  int best = -1, best_depth = 1 << 30;
  for (int t = 0; t < size(); ++t) {
    if (!bags[t].contains(v)) continue;
    int depth = 0;
    for (int p = parent[t]; p >= 0; p = parent[p]) ++depth;
    if (depth < best_depth) {
      best = t;
      best_depth = depth;
    }
  }
  return best;
}

VarSet TreeDecomp::vars() const {
  VarSet s;
  for (auto b : bags) s |= b;
  return s;
}

bool is_tree_decomposition(const TreeDecomp& d, const std::vector<VarSet>& edges) {
  const int k = d.size();
  if (k == 0 || static_cast<int>(d.parent.size()) != k || d.root < 0 || d.root >= k) return false;
  if (d.parent[d.root] != -1) return false;
  for (int t = 0; t < k; ++t) {
    if (t == d.root) continue;
    int steps = 0;
    int p = t;
    while (p != d.root) {
      p = d.parent[p];
      if (p < 0 || p >= k || ++steps > k) return false;
    }
  }
  for (auto e : edges) {
    bool covered = false;
    for (auto b : d.bags) covered = covered || e.subset_of(b);
    if (!covered) return false;
  }
  // Running intersection: the nodes holding v minus their topmost one all have
  // a parent holding v.
  for (int v : d.vars().members()) {
    int top = d.top(v);
    for (int t = 0; t < k; ++t) {
      if (t == top || !d.bags[t].contains(v)) continue;
      if (d.parent[t] < 0 || !d.bags[d.parent[t]].contains(v)) return false;
    }
  }
  return true;
}

bool is_free_connex(const TreeDecomp& d, VarSet head) {
  VarSet all = d.vars();
  for (int x : (all & head).members()) {
    int tx = d.top(x);
    for (int y : (all - head).members()) {
      int ty = d.top(y);
      if (d.is_ancestor(ty, tx)) return false;
    }
  }
  return true;
}

std::vector<VarSet> compute_nu(const TreeDecomp& d, const std::vector<bool>& m, VarSet head) {
  if (static_cast<int>(m.size()) != d.size()) throw InvalidArgument("materialization set size mismatch");
  auto ch = d.children();
  for (int t = 0; t < d.size(); ++t)
    if (m[t])
      for (int c : ch[t])
        if (!m[c]) throw InvalidArgument("materialization set is not closed downward");
  std::vector<VarSet> nu(d.size());
  for (int t = 0; t < d.size(); ++t) {
    if (!m[t]) {
      nu[t] = d.bags[t];
    } else if (t == d.root) {
      nu[t] = d.bags[t] & head;
    } else {
      int p = d.parent[t];
      if (!m[p]) {
        nu[t] = d.bags[t] & (head | d.bags[p]);
      } else if (!(d.bags[t] & head).subset_of(d.bags[p] & head)) {
        nu[t] = d.bags[t] & head;
      } else {
        nu[t] = VarSet();
      }
    }
  }
  return nu;
}

namespace {

std::string subtree_key(const TreeDecomp& d, const std::vector<bool>& m,
                        const std::vector<std::vector<int>>& ch, int t) {
  std::vector<std::string> keys;
  for (int c : ch[t]) keys.push_back(subtree_key(d, m, ch, c));
  std::sort(keys.begin(), keys.end());
  std::string s = std::to_string(d.bags[t].bits()) + (m[t] ? "*" : "");
  if (!keys.empty()) {
    s += "(";
    for (std::size_t i = 0; i < keys.size(); ++i) s += (i ? "," : "") + keys[i];
    s += ")";
  }
  return s;
}

// Renumbers nodes in canonical preorder.
Pmtd canonical(const TreeDecomp& d, const std::vector<bool>& m, VarSet head) {
  auto ch = d.children();
  std::vector<std::string> key(d.size());
  for (int t = 0; t < d.size(); ++t) key[t] = subtree_key(d, m, ch, t);
  std::vector<int> order;
  std::function<void(int)> go = [&](int t) {
    order.push_back(t);
    auto c = ch[t];
    std::sort(c.begin(), c.end(), [&](int a, int b) { return key[a] < key[b]; });
    for (int x : c) go(x);
  };
  go(d.root);
  std::vector<int> pos(d.size());
  for (int i = 0; i < d.size(); ++i) pos[order[i]] = i;
  TreeDecomp out;
  std::vector<bool> mm(d.size());
  out.bags.resize(d.size());
  out.parent.resize(d.size());
  for (int i = 0; i < d.size(); ++i) {
    int t = order[i];
    out.bags[i] = d.bags[t];
    out.parent[i] = d.parent[t] < 0 ? -1 : pos[d.parent[t]];
    mm[i] = m[t];
  }
  out.root = 0;
  Pmtd p;
  p.decomp = out;
  p.m = mm;
  p.nu = compute_nu(out, mm, head);
  return p;
}

}  // namespace

Pmtd make_pmtd(const TreeDecomp& d, const std::vector<bool>& m, VarSet head) { return canonical(d, m, head); }

bool is_valid_pmtd(const Pmtd& p, VarSet head, VarSet access) {
  const auto& d = p.decomp;
  if (!access.subset_of(d.bags[d.root])) return false;
  if (!is_free_connex(d, head)) return false;
  auto ch = d.children();
  for (int t = 0; t < d.size(); ++t)
    if (p.m[t])
      for (int c : ch[t])
        if (!p.m[c]) return false;
  return true;
}

bool check_redundancy(const Pmtd& p) {
  const int k = p.decomp.size();
  for (int t = 0; t < k; ++t)
    if (p.m[t] && p.nu[t].empty()) return true;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a != b && p.m[a] == p.m[b] && p.nu[a].subset_of(p.nu[b])) return true;
  return false;
}

bool check_domination(const Pmtd& p1, const Pmtd& p2) {
  for (int t1 = 0; t1 < p1.decomp.size(); ++t1) {
    bool found = false;
    for (int t2 = 0; t2 < p2.decomp.size() && !found; ++t2)
      found = p1.m[t1] == p2.m[t2] && p1.nu[t1].subset_of(p2.nu[t2]);
    if (!found) return false;
  }
  return true;
}

std::vector<Pmtd> induced_pmtds(const TreeDecomp& d, VarSet head, VarSet access) {
  (void)access;
  const int k = d.size();
  if (k > 20) throw ResourceError("too many bags for antichain enumeration", static_cast<std::size_t>(k));
  auto ch = d.children();
  std::vector<VarSet> subtree(k);
  std::function<VarSet(int)> collect = [&](int t) {
    VarSet s = d.bags[t];
    for (int c : ch[t]) s |= collect(c);
    subtree[t] = s;
    return s;
  };
  collect(d.root);
  std::vector<Pmtd> out;
  std::set<std::string> seen;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    bool antichain = true;
    for (int a = 0; a < k && antichain; ++a)
      for (int b = 0; b < k && antichain; ++b)
        if (a != b && (mask >> a & 1u) && (mask >> b & 1u) && d.is_ancestor(a, b)) antichain = false;
    if (!antichain) continue;
    // Keep nodes not strictly below a frontier node.
    std::vector<int> keep_id(k, -1);
    TreeDecomp nd;
    std::vector<bool> m;
    for (int t : d.preorder()) {
      bool below = false;
      for (int a = 0; a < k; ++a)
        if ((mask >> a & 1u) && d.is_ancestor(a, t)) below = true;
      if (below) continue;
      keep_id[t] = nd.size();
      bool frontier = mask >> t & 1u;
      nd.bags.push_back(frontier ? subtree[t] : d.bags[t]);
      nd.parent.push_back(d.parent[t] < 0 ? -1 : keep_id[d.parent[t]]);
      m.push_back(frontier);
    }
    nd.root = 0;
    Pmtd p = make_pmtd(nd, m, head);
    if (seen.insert(pmtd_key(p)).second) out.push_back(std::move(p));
  }
  return out;
}

std::vector<VarSet> access_edges(const Cqap& q) {
  std::vector<VarSet> e;
  for (const auto& a : q.atoms) e.push_back(a.varset);
  if (!q.access.empty()) e.push_back(q.access);
  return e;
}

namespace {

// Every labeled tree on k nodes, by Pruefer sequence.
template <class F>
void for_each_tree(int k, F&& f) {
  if (k == 1) {
    f(std::vector<std::pair<int, int>>{});
    return;
  }
  if (k == 2) {
    f(std::vector<std::pair<int, int>>{{0, 1}});
    return;
  }
  std::vector<int> seq(k - 2, 0);
  while (true) {
    std::vector<int> deg(k, 1);
    for (int s : seq) ++deg[s];
    std::vector<std::pair<int, int>> edges;
    auto d = deg;
    for (int s : seq) {
      for (int i = 0; i < k; ++i)
        if (d[i] == 1) {
          edges.emplace_back(i, s);
          --d[i];
          --d[s];
          break;
        }
    }
    int u = -1, v = -1;
    for (int i = 0; i < k; ++i)
      if (d[i] == 1) (u < 0 ? u : v) = i;
    edges.emplace_back(u, v);
    f(edges);
    int i = k - 3;
    while (i >= 0 && seq[i] == k - 1) seq[i--] = 0;
    if (i < 0) break;
    ++seq[i];
  }
}

TreeDecomp root_tree(const std::vector<VarSet>& bags, const std::vector<std::pair<int, int>>& edges, int root) {
  const int k = static_cast<int>(bags.size());
  std::vector<std::vector<int>> adj(k);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  TreeDecomp d;
  d.bags = bags;
  d.parent.assign(k, -2);
  d.root = root;
  d.parent[root] = -1;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int t = stack.back();
    stack.pop_back();
    for (int c : adj[t])
      if (d.parent[c] == -2) {
        d.parent[c] = t;
        stack.push_back(c);
      }
  }
  return d;
}

}  // namespace

std::vector<TreeDecomp> enumerate_decompositions(const Cqap& q, int max_bag, std::size_t cap) {
  const int n = q.n();
  if (n > 9) throw ResourceError("elimination-order enumeration is capped at 9 variables", static_cast<std::size_t>(n));
  auto edges = access_edges(q);
  std::vector<std::uint32_t> adj(n, 0);
  for (auto e : edges)
    for (int a : e.members()) adj[a] |= e.bits() & ~(1u << a);

  std::set<std::vector<std::uint32_t>> families;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t count = 0;
  do {
    if (++count > cap) throw ResourceError("elimination-order cap exceeded", count);
    auto g = adj;
    std::uint32_t alive = (1u << n) - 1;
    std::vector<VarSet> bags;
    for (int v : order) {
      std::uint32_t nb = g[v] & alive;
      bags.push_back(VarSet(nb | (1u << v)));
      for (int a : VarSet(nb).members()) g[a] |= nb & ~(1u << a);
      alive &= ~(1u << v);
    }
    std::vector<std::uint32_t> fam;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      bool maximal = true;
      for (std::size_t j = 0; j < bags.size() && maximal; ++j)
        if (bags[i].proper_subset_of(bags[j]) || (bags[i] == bags[j] && j < i)) maximal = false;
      if (maximal) fam.push_back(bags[i].bits());
    }
    std::sort(fam.begin(), fam.end());
    families.insert(fam);
  } while (std::next_permutation(order.begin(), order.end()));

  std::vector<TreeDecomp> out;
  std::set<std::string> seen;
  for (const auto& fam : families) {
    std::vector<VarSet> bags;
    bool small = true;
    for (auto b : fam) {
      bags.emplace_back(b);
      if (VarSet(b).size() > max_bag) small = false;
    }
    if (!small) continue;
    const int k = static_cast<int>(bags.size());
    if (k > 8) throw ResourceError("too many bags for junction-tree enumeration", static_cast<std::size_t>(k));
    for_each_tree(k, [&](const std::vector<std::pair<int, int>>& tree) {
      for (int r = 0; r < k; ++r) {
        if (!q.access.subset_of(bags[r])) continue;
        TreeDecomp d = root_tree(bags, tree, r);
        if (!is_tree_decomposition(d, edges) || !is_free_connex(d, q.head)) continue;
        Pmtd c = make_pmtd(d, std::vector<bool>(k, false), q.head);
        if (!seen.insert(pmtd_key(c)).second) continue;
        out.push_back(c.decomp);
        if (out.size() > cap) throw ResourceError("decomposition cap exceeded", out.size());
      }
    });
  }
  return out;
}

std::vector<Pmtd> enumerate_pmtd_set(const Cqap& q, int max_bag, std::size_t cap) {
  auto decomps = enumerate_decompositions(q, max_bag, cap);
  std::vector<Pmtd> cands;
  std::set<std::string> seen;
  auto consider = [&](Pmtd p) {
    for (auto b : p.decomp.bags)
      if (b.size() > max_bag) return;
    if (!is_valid_pmtd(p, q.head, q.access) || check_redundancy(p)) return;
    if (!seen.insert(pmtd_key(p)).second) return;
    cands.push_back(std::move(p));
    if (cands.size() > cap) throw ResourceError("PMTD cap exceeded", cands.size());
  };
  for (const auto& d : decomps) {
    const int k = d.size();
    auto ch = d.children();
    // Every downward-closed materialization set.
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      bool closed = true;
      for (int t = 0; t < k && closed; ++t)
        if (mask >> t & 1u)
          for (int c : ch[t])
            if (!(mask >> c & 1u)) closed = false;
      if (!closed) continue;
      std::vector<bool> m(k);
      for (int t = 0; t < k; ++t) m[t] = mask >> t & 1u;
      consider(make_pmtd(d, m, q.head));
    }
    for (auto& p : induced_pmtds(d, q.head, q.access)) consider(std::move(p));
  }
  // Drop every PMTD that dominates another; among equivalent ones keep the first.
  std::sort(cands.begin(), cands.end(), [](const Pmtd& a, const Pmtd& b) {
    if (a.decomp.size() != b.decomp.size()) return a.decomp.size() < b.decomp.size();
    return pmtd_key(a) < pmtd_key(b);
  });
  std::vector<Pmtd> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    bool drop = false;
    for (std::size_t j = 0; j < cands.size() && !drop; ++j) {
      if (i == j || !check_domination(cands[j], cands[i])) continue;
      bool mutual = check_domination(cands[i], cands[j]);
      drop = !mutual || j < i;
    }
    if (!drop) out.push_back(cands[i]);
  }
  return out;
}

std::vector<Pmtd> pmtds_from_specs(const Cqap& q) {
  std::vector<Pmtd> out;
  auto edges = access_edges(q);
  for (std::size_t k = 0; k < q.pmtd_specs.size(); ++k) {
    const auto& spec = q.pmtd_specs[k];
    TreeDecomp d;
    std::vector<bool> m;
    for (const auto& node : spec) {
      d.bags.push_back(node.bag);
      d.parent.push_back(node.parent);
      m.push_back(node.materialized);
    }
    d.root = 0;
    std::string where = "pmtd #" + std::to_string(k + 1);
    if (!is_tree_decomposition(d, edges)) throw ValidationError(where + " is not a tree decomposition of the query");
    Pmtd p = make_pmtd(d, m, q.head);
    if (!is_valid_pmtd(p, q.head, q.access))
      throw ValidationError(where + " is not free-connex, misses the access variables, or has M not closed downward");
    if (check_redundancy(p)) throw ValidationError(where + " is redundant");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Pmtd> query_pmtds(const Cqap& q, int max_bag) {
  if (!q.pmtd_specs.empty()) return pmtds_from_specs(q);
  return enumerate_pmtd_set(q, max_bag);
}

std::string pmtd_label(const Pmtd& p, const Cqap& q) {
  std::string s = "(";
  bool first = true;
  for (int t : p.decomp.preorder()) {
    if (!first) s += ", ";
    first = false;
    s += (p.m[t] ? "S" : "T") + q.set_label(p.nu[t]);
  }
  return s + ")";
}

std::string pmtd_key(const Pmtd& p) {
  auto ch = p.decomp.children();
  return subtree_key(p.decomp, p.m, ch, p.decomp.root);
}

nlohmann::json pmtd_to_json(const Pmtd& p, const Cqap& q) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int t = 0; t < p.decomp.size(); ++t) {
    nodes.push_back({{"id", t},
                     {"parent", p.decomp.parent[t]},
                     {"bag", q.set_names(p.decomp.bags[t])},
                     {"materialized", static_cast<bool>(p.m[t])},
                     {"view", q.set_names(p.nu[t])}});
  }
  return {{"label", pmtd_label(p, q)}, {"root", p.decomp.root}, {"nodes", nodes}};
}

Pmtd pmtd_from_json(const nlohmann::json& j, const Cqap& q) {
  TreeDecomp d;
  std::vector<bool> m;
  for (const auto& node : j.at("nodes")) {
    VarSet bag;
    for (const auto& name : node.at("bag")) {
      int v = q.var_index(name.get<std::string>());
      if (v < 0) throw InvalidArgument("unknown variable in PMTD json: " + name.get<std::string>());
      bag |= VarSet::single(v);
    }
    d.bags.push_back(bag);
    d.parent.push_back(node.at("parent").get<int>());
    m.push_back(node.at("materialized").get<bool>());
  }
  d.root = j.at("root").get<int>();
  return make_pmtd(d, m, q.head);
}

}  // namespace cqap
