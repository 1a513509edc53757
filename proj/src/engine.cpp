#include "cqap/engine.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace cqap {

namespace fs = std::filesystem;

std::string bucket_mode_name(BucketMode m) {
  switch (m) {
    case BucketMode::Auto: return "auto";
    case BucketMode::Geometric: return "geometric";
    case BucketMode::HeavyLight: return "heavy-light";
  }
  return "auto";
}

BucketMode bucket_mode_from_name(const std::string& s) {
  if (s == "auto") return BucketMode::Auto;
  if (s == "geometric") return BucketMode::Geometric;
  if (s == "heavy-light") return BucketMode::HeavyLight;
  throw InvalidArgument("unknown bucket mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Split steps

std::vector<SplitPart> split_relation(const Relation& r, VarSet x, VarSet y, BucketMode mode, double threshold) {
  if (x.empty() || !x.proper_subset_of(y) || !y.subset_of(r.schema()))
    throw InvalidArgument("split needs a nonempty x strictly inside y inside the schema");
  Relation ry = project(r, y);
  auto st = degree(ry, x, y);
  std::vector<std::pair<Tuple, std::uint64_t>> xs(st.counts.begin(), st.counts.end());
  std::vector<std::vector<std::size_t>> groups;  // indices into xs
  if (mode == BucketMode::HeavyLight) {
    std::vector<std::size_t> heavy, light;
    for (std::size_t i = 0; i < xs.size(); ++i)
      (static_cast<double>(xs[i].second) >= threshold ? heavy : light).push_back(i);
    if (!heavy.empty()) groups.push_back(std::move(heavy));
    if (!light.empty()) groups.push_back(std::move(light));
  } else {
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a].second > xs[b].second; });
    const std::uint64_t total = ry.size();
    std::size_t i = 0;
    while (i < order.size()) {
      std::uint64_t cap = std::max<std::uint64_t>(1, total / xs[order[i]].second);
      std::vector<std::size_t> g;
      while (i < order.size() && g.size() < cap) g.push_back(order[i++]);
      std::sort(g.begin(), g.end());
      groups.push_back(std::move(g));
    }
  }
  auto xpos = positions_of(y, x);
  std::map<Tuple, std::size_t> part_of;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto i : groups[g]) part_of[xs[i].first] = g;
  std::vector<std::vector<Tuple>> rows(groups.size());
  for (const auto& row : ry.rows()) rows[part_of.at(pick(row, xpos))].push_back(row);
  std::vector<SplitPart> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    SplitPart p;
    for (auto i : groups[g]) {
      p.x_values.push_back(xs[i].first);
      p.max_degree = std::max(p.max_degree, xs[i].second);
    }
    p.n_x = p.x_values.size();
    p.rows = Relation(r.name(), y, std::move(rows[g]));
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plans

std::vector<RulePlan> plan_rules(const Cqap& q, const std::vector<TwoPhaseRule>& rules, const Rational& s) {
  auto ctx = LpContext::from_query(q, BoundAssignment::standard(1, 0));
  std::vector<RulePlan> plans;
  for (const auto& rule : rules) {
    RulePlan p;
    p.rule = rule;
    auto sol = solve_joint_lp(ctx, rule, s);
    p.status = sol.status;
    p.obj = sol.obj;
    if (!rule.t_targets.empty()) p.online_target = rule.t_targets.front().schema;
    if (sol.status == ObjStatus::Finite) {
      const auto& ineq = sol.ineq;
      try {
        if (ineq.theta_norm() > 0) p.proof_s = construct(normalized_s_side(ineq));
        if (ineq.lambda_norm() > 0) p.proof_t = construct(normalized_t_side(ineq));
      } catch (const std::exception& e) {
        throw ValidationError("no proof sequence for rule " + rule_label(rule, q) + ": " + e.what());
      }
      Rational best = 0;
      for (const auto& [k, c] : ineq.lambda.coeffs())
        if (c > best) {
          best = c;
          p.online_target = VarSet(k.second);
        }
      p.ineq = ineq;
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

// ---------------------------------------------------------------------------
// Subproblem execution

ModelResult panda_execute(const std::vector<JoinInput>& inputs, const std::vector<VarSet>& targets, std::size_t limit,
                          OpCounters* counters) {
  ModelResult best;
  best.overflow = true;
  std::vector<VarSet> order = targets;
  std::stable_sort(order.begin(), order.end(), [](VarSet a, VarSet b) { return a.size() < b.size(); });
  for (VarSet t : order) {
    std::size_t lim = best.overflow ? limit : best.relation.size();
    auto r = generic_join(inputs, t, counters, lim);
    if (r.overflow) continue;
    if (best.overflow || r.relation.size() < best.relation.size()) {
      best.target = t;
      best.relation = std::move(r.relation);
      best.overflow = false;
    }
  }
  return best;
}

Relation reduce_with_join(const Relation& v, const std::vector<Relation>& atoms) {
  std::vector<Relation> rels = atoms;
  rels.push_back(v);
  return generic_join(rels, v.schema()).renamed(v.name());
}

// ---------------------------------------------------------------------------
// Online Yannakakis

namespace {

// Nearest proper ancestor whose view schema is nonempty, or -1.
int view_parent(const Pmtd& p, int t) {
  int a = p.decomp.parent[t];
  while (a >= 0 && p.nu[a].empty()) a = p.decomp.parent[a];
  return a;
}

std::vector<int> postorder(const TreeDecomp& d) {
  auto pre = d.preorder();
  return std::vector<int>(pre.rbegin(), pre.rend());
}

}  // namespace

ReducedTree reduce_tree(const Pmtd& p, VarSet head, VarSet access) {
  const auto& d = p.decomp;
  if (!is_valid_pmtd(p, head, access)) throw InvalidArgument("the decomposition is not a free-connex PMTD");
  ReducedTree rt;
  const int n = d.size();
  rt.order = postorder(d);
  rt.kept.assign(n, false);
  rt.new_parent.assign(n, -1);
  rt.kept_schema.assign(n, VarSet());
  rt.down_key.assign(n, VarSet());
  for (int t = 0; t < n; ++t) {
    if (p.nu[t].empty()) continue;
    if (t == d.root) {
      rt.kept[t] = true;
    } else {
      int a = view_parent(p, t);
      rt.kept[t] = a < 0 || !(p.nu[t] & head).subset_of(p.nu[a]);
    }
    if (rt.kept[t]) rt.kept_schema[t] = p.nu[t] & head;
  }
  for (int t : d.preorder()) {
    if (!rt.kept[t]) continue;
    int a = d.parent[t];
    while (a >= 0 && !rt.kept[a]) a = d.parent[a];
    rt.new_parent[t] = a;
    VarSet above = access;
    for (int b = a; b >= 0; b = rt.new_parent[b]) above |= rt.kept_schema[b];
    rt.down_key[t] = rt.kept_schema[t] & above;
  }
  return rt;
}

namespace {

// Key of the index a node view is probed with in the bottom-up pass.
VarSet up_key(const Pmtd& p, int t, VarSet access) {
  int a = view_parent(p, t);
  return a < 0 ? (p.nu[t] & access) : (p.nu[t] & p.nu[a]);
}

// S-view copies of a PMTD, semijoin-reduced along the edges between materialized nodes.
std::vector<std::unique_ptr<SViewNode>> build_s_nodes(const Pmtd& p, const ReducedTree& rt, VarSet access,
                                                      const std::map<VarSet, Relation>& s_views,
                                                      OpCounters* counters) {
  const auto& d = p.decomp;
  const int n = d.size();
  std::vector<Relation> full(n);
  for (int t = 0; t < n; ++t) {
    if (!p.m[t] || p.nu[t].empty()) continue;
    auto it = s_views.find(p.nu[t]);
    full[t] = it == s_views.end() ? Relation("S", p.nu[t]) : it->second;
  }
  auto ss_parent = [&](int t) {
    if (!p.m[t] || p.nu[t].empty()) return -1;
    int a = view_parent(p, t);
    return a >= 0 && p.m[a] ? a : -1;
  };
  for (int t : rt.order) {
    int a = ss_parent(t);
    if (a >= 0) full[a] = semijoin(full[a], full[t], counters);
  }
  for (int t : d.preorder()) {
    int a = ss_parent(t);
    if (a >= 0) full[t] = semijoin(full[t], full[a], counters);
  }
  std::vector<std::unique_ptr<SViewNode>> out(n);
  for (int t = 0; t < n; ++t) {
    if (!p.m[t] || p.nu[t].empty()) continue;
    auto node = std::make_unique<SViewNode>();
    node->full = std::move(full[t]);
    node->up_index = HashIndex(node->full, up_key(p, t, access));
    if (rt.kept[t]) {
      node->kept = project(node->full, rt.kept_schema[t]);
      node->down_index = HashIndex(node->kept, rt.down_key[t]);
    }
    out[t] = std::move(node);
  }
  return out;
}

}  // namespace

Relation online_yannakakis(const Pmtd& p, const ReducedTree& rt, VarSet head, VarSet access,
                           const std::vector<std::unique_ptr<SViewNode>>& s_nodes,
                           const std::map<VarSet, Relation>& t_views, const Relation& request, OpCounters* counters) {
  const auto& d = p.decomp;
  const int n = d.size();
  if (request.schema() != access) throw InvalidArgument("request schema differs from the access variables");
  std::vector<Relation> cur(n);
  for (int t = 0; t < n; ++t) {
    if (p.m[t]) continue;
    auto it = t_views.find(p.nu[t]);
    cur[t] = it == t_views.end() ? Relation("T", p.nu[t]) : it->second;
  }
  // Bottom-up semijoin pass.
  for (int t : rt.order) {
    if (t == d.root || p.nu[t].empty()) continue;
    int a = view_parent(p, t);
    if (a < 0 || p.m[a]) continue;
    if (p.m[t])
      cur[a] = semijoin(cur[a], s_nodes[t]->full, s_nodes[t]->up_index, counters, true);
    else
      cur[a] = semijoin(cur[a], cur[t], counters);
  }
  Relation acc = request;
  if (p.m[d.root])
    acc = semijoin(acc, s_nodes[d.root]->full, s_nodes[d.root]->up_index, counters, true);
  else
    acc = semijoin(acc, cur[d.root], counters);
  // Top-down join over the head variables.
  for (int t : d.preorder()) {
    if (!rt.kept[t] || acc.empty()) continue;
    const Relation* view;
    const HashIndex* idx;
    Relation kept;
    HashIndex tmp;
    bool is_view = p.m[t];
    if (is_view) {
      view = &s_nodes[t]->kept;
      idx = &s_nodes[t]->down_index;
    } else {
      kept = project(cur[t], rt.kept_schema[t]);
      if (counters) counters->tuples_scanned += cur[t].size();
      tmp = HashIndex(kept, rt.down_key[t]);
      view = &kept;
      idx = &tmp;
    }
    VarSet out_schema = acc.schema() | view->schema();
    auto kpos = positions_of(acc.schema(), rt.down_key[t]);
    std::vector<std::pair<bool, int>> src;
    for (int v : out_schema.members()) {
      if (acc.schema().contains(v))
        src.emplace_back(true, acc.schema().rank_of(v));
      else
        src.emplace_back(false, view->schema().rank_of(v));
    }
    std::vector<Tuple> rows;
    for (const auto& row : acc.rows()) {
      if (counters) {
        counters->tuples_scanned += 1;
        (is_view ? counters->s_view_probes : counters->hash_probes) += 1;
      }
      const auto* hits = idx->probe(pick(row, kpos));
      if (!hits) continue;
      for (auto id : *hits) {
        const auto& vr = view->row(id);
        Tuple o;
        o.reserve(src.size());
        for (auto [from_acc, pos] : src) o.push_back(from_acc ? row[pos] : vr[pos]);
        rows.push_back(std::move(o));
      }
    }
    acc = Relation("answer", out_schema, std::move(rows));
  }
  if (acc.empty()) return Relation("answer", head);
  if (!head.subset_of(acc.schema())) throw ValidationError("reduced tree does not cover the head variables");
  return project(acc, head).renamed("answer");
}

Relation online_yannakakis(const Pmtd& p, VarSet head, VarSet access, const std::map<VarSet, Relation>& s_views,
                           const std::map<VarSet, Relation>& t_views, const Relation& request, OpCounters* counters) {
  auto rt = reduce_tree(p, head, access);
  auto nodes = build_s_nodes(p, rt, access, s_views, nullptr);
  return online_yannakakis(p, rt, head, access, nodes, t_views, request, counters);
}

// ---------------------------------------------------------------------------
// Preprocessing

Rational budget_units(const Database& db, double budget) {
  if (budget < 1) throw InvalidArgument("budget must be at least 1");
  double n = std::max<double>(2, static_cast<double>(db.max_table_size()));
  double units = std::log2(budget) / std::log2(n);
  return Rational(static_cast<long>(std::llround(units * 64)), 64);
}

std::size_t PreprocessedStore::stored_tuples() const {
  std::size_t total = 0;
  for (const auto& [_, v] : s_views) total += v.size();
  return total;
}

namespace {

// Filtered copies of every atom, grouped by the part indices of the splits on that atom.
struct SplitLayout {
  std::vector<std::vector<int>> splits_on;  // per atom: split indices
  std::vector<std::size_t> part_count;      // per split
  std::vector<std::map<std::vector<int>, Relation>> groups;  // per atom
};

SplitLayout layout_splits(const std::vector<Relation>& atoms, const std::vector<SplitDescriptor>& splits,
                          BucketMode mode) {
  SplitLayout L;
  L.splits_on.resize(atoms.size());
  L.groups.resize(atoms.size());
  std::vector<std::map<Tuple, int>> part_of(splits.size());
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const auto& sd = splits[k];
    L.splits_on[sd.atom].push_back(static_cast<int>(k));
    auto parts = split_relation(atoms[sd.atom], sd.x, sd.y, mode, sd.threshold);
    L.part_count.push_back(parts.size());
    for (std::size_t j = 0; j < parts.size(); ++j)
      for (const auto& xv : parts[j].x_values) part_of[k][xv] = static_cast<int>(j);
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const auto& on = L.splits_on[a];
    if (on.empty()) {
      L.groups[a].emplace(std::vector<int>{}, atoms[a]);
      continue;
    }
    std::vector<std::vector<int>> xpos;
    for (int k : on) xpos.push_back(positions_of(atoms[a].schema(), splits[k].x));
    std::map<std::vector<int>, std::vector<Tuple>> rows;
    for (const auto& row : atoms[a].rows()) {
      std::vector<int> key;
      for (std::size_t i = 0; i < on.size(); ++i) key.push_back(part_of[on[i]].at(pick(row, xpos[i])));
      rows[key].push_back(row);
    }
    for (auto& [key, rs] : rows) L.groups[a].emplace(key, Relation(atoms[a].name(), atoms[a].schema(), std::move(rs)));
  }
  return L;
}

std::vector<int> atom_key(const SplitLayout& L, int a, const std::vector<int>& parts) {
  std::vector<int> key;
  for (int k : L.splits_on[a]) key.push_back(parts[k]);
  return key;
}

struct RuleOutput {
  RuleRun run;
  std::map<VarSet, std::vector<Tuple>> s_rows;
  std::vector<JEntry> j;
  std::map<PreprocessedStore::SubKey, Relation> sub;
  OpCounters counters;
};

BucketMode choose_mode(const JointInequality& ineq, BucketMode requested) {
  if (requested != BucketMode::Auto) return requested;
  if (!ineq.delta_s.empty()) return BucketMode::Geometric;
  for (const auto& g : ineq.gamma) {
    if (g.gamma_xy == 0 && g.gamma_yx == 0) continue;
    if (g.gamma_yx != 0 || g.sc.x.size() != 1) return BucketMode::Geometric;
  }
  return BucketMode::HeavyLight;
}

std::vector<VarSet> theta_targets(const RulePlan& plan) {
  std::vector<VarSet> out;
  if (plan.ineq) {
    for (const auto& [k, c] : plan.ineq->theta.coeffs())
      if (c > 0) out.push_back(VarSet(k.second));
  }
  if (out.empty())
    for (const auto& t : plan.rule.s_targets) out.push_back(t.schema);
  return out;
}

std::size_t cap_limit(double cap_factor, double log_size) {
  double v = cap_factor * std::exp2(log_size) + 16;
  if (v >= 1e18) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(v);
}

RuleOutput run_rule(int r, const RulePlan& plan, const std::vector<Relation>& atoms,
                    const std::vector<std::unique_ptr<TrieIndex>>& atom_index, double budget,
                    const EngineConfig& cfg) {
  RuleOutput out;
  const double log_s = std::log2(budget);
  auto whole_inputs = [&] {
    std::vector<JoinInput> in;
    for (std::size_t a = 0; a < atoms.size(); ++a) in.push_back({&atoms[a], atom_index[a].get(), false});
    return in;
  };
  auto add_rows = [&](const ModelResult& m) {
    auto& dst = out.s_rows[m.target];
    dst.insert(dst.end(), m.relation.rows().begin(), m.relation.rows().end());
    out.counters.tuples_materialized += m.relation.size();
  };
  auto to_online = [&] {
    out.run.subproblems = 1;
    if (plan.rule.t_targets.empty()) throw ValidationError("a rule without T-targets cannot be deferred");
    out.j.push_back(JEntry{r, {}});
    ++out.run.aborted;
  };
  for (const auto& a : atoms)
    if (a.empty()) return out;
  if (plan.status == ObjStatus::Unbounded || (plan.status == ObjStatus::MaterializeAll && plan.rule.t_targets.empty())) {
    out.run.subproblems = 1;
    auto m = panda_execute(whole_inputs(), theta_targets(plan), std::numeric_limits<std::size_t>::max(),
                           &out.counters);
    add_rows(m);
    ++out.run.materialized;
    return out;
  }
  if (plan.status == ObjStatus::MaterializeAll) {
    out.run.subproblems = 1;
    auto m = panda_execute(whole_inputs(), theta_targets(plan), cap_limit(cfg.cap_factor, log_s), &out.counters);
    if (m.overflow) {
      ++out.run.over_cap;
      out.run.subproblems = 0;
      to_online();
      return out;
    }
    add_rows(m);
    ++out.run.materialized;
    return out;
  }
  const auto& ineq = *plan.ineq;
  if (plan.rule.s_targets.empty() || ineq.theta_norm() == 0) {
    to_online();
    return out;
  }
  // Splits and the normalized S-side coefficients.
  out.run.mode = choose_mode(ineq, cfg.mode);
  if (out.run.mode == BucketMode::Auto) out.run.mode = BucketMode::Geometric;
  const Rational theta = ineq.theta_norm();
  Rational m_sum = 0;
  for (const auto& g : ineq.gamma) {
    if (g.gamma_xy == 0 && g.gamma_yx == 0) continue;
    if (g.sc.atom < 0) continue;
    out.run.splits.push_back(SplitDescriptor{g.sc.atom, g.sc.x, g.sc.y, 0});
    m_sum += g.gamma_xy / theta;
  }
  if (out.run.mode == BucketMode::HeavyLight) {
    if (m_sum <= 0) {
      out.run.mode = BucketMode::Geometric;
    } else {
      double root = std::exp2(log_s / to_double(m_sum));
      for (auto& sd : out.run.splits) {
        double ry = static_cast<double>(project(atoms[sd.atom], sd.y).size());
        sd.threshold = ry / root;
      }
    }
  }
  auto L = layout_splits(atoms, out.run.splits, out.run.mode);
  std::vector<std::tuple<VarSet, VarSet, double>> coords;
  const auto g_s = ineq.g_s();
  for (const auto& [k, c] : g_s.coeffs())
    if (c > 0) coords.emplace_back(VarSet(k.first), VarSet(k.second), to_double(c / theta));
  std::size_t total = 1;
  for (auto c : L.part_count) {
    total *= std::max<std::size_t>(c, 1);
    if (total > cfg.max_subproblems) throw ResourceError("too many subproblems", total);
  }
  std::map<std::tuple<int, std::vector<int>, std::uint32_t, std::uint32_t>, double> stat_cache;
  auto stat = [&](int a, const std::vector<int>& key, const Relation& rel, VarSet x, VarSet y) {
    auto ck = std::make_tuple(a, key, x.bits(), y.bits());
    auto it = stat_cache.find(ck);
    if (it != stat_cache.end()) return it->second;
    double v = x.empty() ? std::log2(static_cast<double>(project(rel, y).size()))
                         : std::log2(static_cast<double>(degree(rel, x, y).max));
    stat_cache.emplace(ck, v);
    return v;
  };
  std::map<std::pair<int, std::vector<int>>, std::unique_ptr<TrieIndex>> trie_cache;
  auto trie = [&](int a, const std::vector<int>& key, const Relation& rel) {
    auto& slot = trie_cache[{a, key}];
    if (!slot) slot = std::make_unique<TrieIndex>(rel);
    return slot.get();
  };
  const auto targets = theta_targets(plan);
  std::vector<int> parts(L.part_count.size(), 0);
  if (total == 0) return out;
  for (std::size_t step = 0; step < total; ++step) {
    std::size_t rest = step;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      parts[k] = static_cast<int>(rest % L.part_count[k]);
      rest /= L.part_count[k];
    }
    std::vector<std::pair<std::vector<int>, const Relation*>> rels;
    bool empty = false;
    for (std::size_t a = 0; a < atoms.size() && !empty; ++a) {
      auto key = atom_key(L, static_cast<int>(a), parts);
      auto it = L.groups[a].find(key);
      if (it == L.groups[a].end())
        empty = true;
      else
        rels.emplace_back(key, &it->second);
    }
    if (empty) continue;
    ++out.run.subproblems;
    double potential = 0;
    for (const auto& [x, y, c] : coords) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < atoms.size(); ++a)
        if (y.subset_of(atoms[a].schema()))
          best = std::min(best, stat(static_cast<int>(a), rels[a].first, *rels[a].second, x, y));
      potential += c * best;
    }
    bool done = false;
    if (potential <= log_s + 1e-9) {
      std::vector<JoinInput> in;
      for (std::size_t a = 0; a < atoms.size(); ++a)
        in.push_back({rels[a].second, trie(static_cast<int>(a), rels[a].first, *rels[a].second), false});
      auto m = panda_execute(in, targets, cap_limit(cfg.cap_factor, potential), &out.counters);
      if (m.overflow) {
        ++out.run.over_cap;
      } else {
        add_rows(m);
        ++out.run.materialized;
        done = true;
      }
    }
    if (!done) {
      ++out.run.aborted;
      out.j.push_back(JEntry{r, parts});
      for (std::size_t a = 0; a < atoms.size() && !parts.empty(); ++a)
        out.sub.emplace(PreprocessedStore::SubKey{r, static_cast<int>(a), rels[a].first}, *rels[a].second);
    }
  }
  return out;
}

void seal(PreprocessedStore& st) {
  st.trees.clear();
  st.s_nodes.clear();
  for (const auto& p : st.pmtds) {
    st.trees.push_back(reduce_tree(p, st.query.head, st.query.access));
    st.s_nodes.push_back(build_s_nodes(p, st.trees.back(), st.query.access, st.s_views, &st.counters));
  }
  for (auto& [_, sub] : st.sub_tables)
    if (!sub.index) sub.index = std::make_unique<TrieIndex>(sub.rel);
}

void bind_store_atoms(PreprocessedStore& st, const Database& db) {
  st.atoms = bind_atoms(db, st.query);
  st.atom_index.clear();
  for (const auto& a : st.atoms) st.atom_index.push_back(std::make_unique<TrieIndex>(a));
}

}  // namespace

std::unique_ptr<PreprocessedStore> preprocess(const Database& db, const Cqap& q, const std::vector<Pmtd>& pmtds,
                                              const std::vector<RulePlan>& plans, double budget,
                                              const EngineConfig& config) {
  if (budget < 1) throw InvalidArgument("budget must be at least 1");
  auto st = std::make_unique<PreprocessedStore>();
  st->query = q;
  st->pmtds = pmtds;
  st->plans = plans;
  st->config = config;
  st->budget = budget;
  st->s_units = budget_units(db, budget);
  st->db_digest = database_digest(db);
  bind_store_atoms(*st, db);

  std::vector<RuleOutput> outs(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++) {
      try {
        outs[i] = run_rule(static_cast<int>(i), plans[i], st->atoms, st->atom_index, budget, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(plans.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<VarSet, std::vector<Tuple>> rows;
  for (auto& o : outs) {
    st->runs.push_back(o.run);
    st->counters += o.counters;
    for (auto& [schema, rs] : o.s_rows) {
      auto& dst = rows[schema];
      dst.insert(dst.end(), rs.begin(), rs.end());
    }
    for (auto& e : o.j) st->j_index.push_back(std::move(e));
    for (auto& [key, rel] : o.sub) st->sub_tables.emplace(key, PreprocessedStore::SubTable{std::move(rel), nullptr});
  }
  std::vector<JoinInput> all;
  for (std::size_t a = 0; a < st->atoms.size(); ++a) all.push_back({&st->atoms[a], st->atom_index[a].get(), false});
  for (auto& [schema, rs] : rows) {
    Relation v("S" + q.set_label(schema), schema, std::move(rs));
    std::vector<JoinInput> in = all;
    TrieIndex vi(v);
    in.push_back({&v, &vi, false});
    auto reduced = generic_join(in, schema, &st->counters).relation;
    st->s_views.emplace(schema, reduced.renamed(v.name()));
  }
  seal(*st);
  return st;
}

// ---------------------------------------------------------------------------
// Online phase

AnswerResult answer(const PreprocessedStore& st, const Relation& request) {
  const auto& q = st.query;
  if (request.schema() != q.access) throw InvalidArgument("request schema differs from the access variables");
  AnswerResult res;
  auto& c = res.counters;
  if (request.empty()) {
    res.answer = Relation("answer", q.head);
    return res;
  }
  TrieIndex q_index(request);
  c.tuples_scanned += request.size();
  std::map<VarSet, std::vector<Tuple>> t_rows;
  for (const auto& e : st.j_index) {
    const auto& plan = st.plans[e.rule];
    const auto& run = st.runs[e.rule];
    std::vector<JoinInput> in;
    if (!q.access.empty()) in.push_back({&request, &q_index, false});
    for (std::size_t a = 0; a < st.atoms.size(); ++a) {
      if (e.parts.empty() || run.splits.empty()) {
        in.push_back({&st.atoms[a], st.atom_index[a].get(), false});
        continue;
      }
      std::vector<int> key;
      for (std::size_t k = 0; k < run.splits.size(); ++k)
        if (run.splits[k].atom == static_cast<int>(a)) key.push_back(e.parts[k]);
      const auto& sub = st.sub_tables.at(PreprocessedStore::SubKey{e.rule, static_cast<int>(a), key});
      in.push_back({&sub.rel, sub.index.get(), false});
    }
    VarSet target = plan.online_target;
    auto r = project(generic_join(in, target | q.access, &c).relation, target);
    auto& dst = t_rows[target];
    dst.insert(dst.end(), r.rows().begin(), r.rows().end());
    ++res.online_subproblems;
  }
  std::map<VarSet, Relation> t_views;
  for (auto& [schema, rs] : t_rows) {
    Relation v("T" + q.set_label(schema), schema, std::move(rs));
    std::vector<Tuple> keep;
    std::vector<std::pair<VarSet, const TrieIndex*>> checks;
    for (std::size_t a = 0; a < st.atoms.size(); ++a) {
      VarSet sh = schema & st.atoms[a].schema();
      if (!sh.empty()) checks.emplace_back(sh, st.atom_index[a].get());
    }
    VarSet qs = schema & q.access;
    if (!qs.empty()) checks.emplace_back(qs, &q_index);
    for (const auto& row : v.rows()) {
      c.tuples_scanned += 1;
      bool ok = true;
      for (const auto& [sh, idx] : checks) {
        c.hash_probes += 1;
        if (!idx->contains(sh, pick(row, positions_of(schema, sh)))) {
          ok = false;
          break;
        }
      }
      if (ok) keep.push_back(row);
    }
    t_views.emplace(schema, Relation(v.name(), schema, std::move(keep)));
  }
  Relation out("answer", q.head);
  for (std::size_t i = 0; i < st.pmtds.size(); ++i) {
    auto part = online_yannakakis(st.pmtds[i], st.trees[i], q.head, q.access, st.s_nodes[i], t_views, request, &c);
    out = union_of(out, part);
  }
  res.answer = out.renamed("answer");
  return res;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  }
  void str(const std::string& s) {
    bytes(s.data(), s.size());
    std::uint64_t n = s.size();
    bytes(&n, sizeof n);
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
};

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::string status_name(ObjStatus s) {
  switch (s) {
    case ObjStatus::Finite: return "finite";
    case ObjStatus::MaterializeAll: return "materialize-all";
    case ObjStatus::Unbounded: return "unbounded";
  }
  return "finite";
}

ObjStatus status_from_name(const std::string& s) {
  if (s == "finite") return ObjStatus::Finite;
  if (s == "materialize-all") return ObjStatus::MaterializeAll;
  if (s == "unbounded") return ObjStatus::Unbounded;
  throw ConfigError("unknown rule status '" + s + "'");
}

std::string view_file(const Cqap& q, VarSet s) {
  std::string f = "S";
  for (const auto& n : q.set_names(s)) f += "_" + n;
  return f + ".tsv";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Relation parse_view(const std::string& text, const Cqap& q, VarSet schema, const Dictionary& dict) {
  std::istringstream in(text);
  std::string line;
  std::vector<Tuple> rows;
  std::vector<int> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("#schema", 0) == 0) {
      std::istringstream hs(line.substr(7));
      std::string name;
      VarSet seen;
      while (hs >> name) {
        int v = q.var_index(name);
        if (v < 0 || !schema.contains(v)) throw ConfigError("view column '" + name + "' does not match the manifest");
        order.push_back(schema.rank_of(v));
        seen |= VarSet::single(v);
      }
      if (seen != schema) throw ConfigError("view header does not match the manifest");
      continue;
    }
    if (order.empty()) throw ConfigError("view file without a schema header");
    Tuple t(order.size());
    std::size_t col = 0, start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      std::string cell = line.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
      if (col >= order.size()) throw ConfigError("view row arity mismatch");
      auto id = dict.find(cell);
      if (!id) throw ConfigError("view value '" + cell + "' is not in the database");
      t[order[col++]] = *id;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (col != order.size()) throw ConfigError("view row arity mismatch");
    rows.push_back(std::move(t));
  }
  return Relation("S" + q.set_label(schema), schema, std::move(rows));
}

nlohmann::json schemas_json(const std::vector<RuleTarget>& ts, const Cqap& q) {
  auto j = nlohmann::json::array();
  for (const auto& t : ts) j.push_back(varset_to_json(t.schema, q.var_names));
  return j;
}

}  // namespace

std::uint64_t database_digest(const Database& db) {
  Fnv f;
  for (const auto& [name, t] : db.tables) {
    f.str(name);
    f.u64(t.rows.size());
    for (const auto& row : t.rows)
      for (Value v : row) f.str(db.dict.lookup(v));
  }
  return f.h;
}

std::uint64_t query_digest(const Cqap& q) {
  Fnv f;
  f.str(print_query(q));
  return f.h;
}

nlohmann::json counters_to_json(const OpCounters& c) {
  return {{"tuples_scanned", c.tuples_scanned},
          {"hash_probes", c.hash_probes},
          {"s_view_probes", c.s_view_probes},
          {"s_view_scans", c.s_view_scans},
          {"tuples_materialized", c.tuples_materialized}};
}

nlohmann::json PreprocessedStore::manifest() const {
  const auto& names = query.var_names;
  nlohmann::json j;
  j["format"] = 1;
  j["query"] = query.name;
  j["query_digest"] = hex(query_digest(query));
  j["db_digest"] = hex(db_digest);
  j["budget"] = budget;
  j["s_units"] = to_string(s_units);
  j["mode"] = bucket_mode_name(config.mode);
  j["cap_factor"] = config.cap_factor;
  j["max_subproblems"] = config.max_subproblems;
  std::size_t db_size = 0;
  for (const auto& a : atoms) db_size += a.size();
  double lg = std::log2(std::max<double>(2, static_cast<double>(db_size)));
  j["space"] = {{"stored_tuples", stored_tuples()},
                {"materialized", counters.tuples_materialized},
                {"log2_db", lg},
                {"polylog_exponent", 2},
                {"constant", static_cast<double>(counters.tuples_materialized) / (budget * lg * lg)}};
  auto rules = nlohmann::json::array();
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    nlohmann::json r;
    r["label"] = rule_label(p.rule, query);
    r["s_targets"] = schemas_json(p.rule.s_targets, query);
    r["t_targets"] = schemas_json(p.rule.t_targets, query);
    r["status"] = status_name(p.status);
    r["obj"] = to_string(p.obj);
    r["online_target"] = varset_to_json(p.online_target, names);
    if (p.ineq) r["inequality"] = joint_to_json(*p.ineq, names);
    if (p.proof_s) r["proof_s"] = proof_to_json(*p.proof_s, names);
    if (p.proof_t) r["proof_t"] = proof_to_json(*p.proof_t, names);
    if (i < runs.size()) {
      const auto& run = runs[i];
      r["mode"] = bucket_mode_name(run.mode);
      auto sp = nlohmann::json::array();
      for (const auto& s : run.splits)
        sp.push_back({{"atom", s.atom},
                      {"x", varset_to_json(s.x, names)},
                      {"y", varset_to_json(s.y, names)},
                      {"threshold", s.threshold}});
      r["splits"] = sp;
      r["subproblems"] = run.subproblems;
      r["materialized"] = run.materialized;
      r["aborted"] = run.aborted;
      r["over_cap"] = run.over_cap;
    }
    rules.push_back(std::move(r));
  }
  j["rules"] = rules;
  auto pj = nlohmann::json::array();
  for (const auto& p : pmtds) pj.push_back(pmtd_to_json(p, query));
  j["pmtds"] = pj;
  auto sv = nlohmann::json::array();
  for (const auto& [schema, rel] : s_views)
    sv.push_back({{"schema", varset_to_json(schema, names)}, {"file", view_file(query, schema)}, {"size", rel.size()}});
  j["s_views"] = sv;
  j["j_entries"] = j_index.size();
  j["counters"] = counters_to_json(counters);
  return j;
}

void save_store(const PreprocessedStore& st, const Database& db, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << st.manifest().dump(2) << '\n';
  }
  for (const auto& [schema, rel] : st.s_views) {
    std::ofstream out(fs::path(dir) / view_file(st.query, schema));
    out << format_relation(rel, st.query, db.dict);
  }
  auto jj = nlohmann::json::array();
  for (const auto& e : st.j_index) jj.push_back({{"rule", e.rule}, {"parts", e.parts}});
  std::ofstream out(fs::path(dir) / "j_index.json");
  out << jj.dump(2) << '\n';
}

std::unique_ptr<PreprocessedStore> load_store(const std::string& dir, const Database& db, const Cqap& q) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(fs::path(dir) / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  if (m.value("query_digest", "") != hex(query_digest(q)))
    throw ConfigError("store was built for a different query");
  if (m.value("db_digest", "") != hex(database_digest(db)))
    throw ConfigError("store was built for a different database");
  auto st = std::make_unique<PreprocessedStore>();
  const auto& names = q.var_names;
  try {
    st->query = q;
    st->budget = m.at("budget").get<double>();
    st->s_units = parse_rational(m.at("s_units").get<std::string>());
    st->config.mode = bucket_mode_from_name(m.at("mode").get<std::string>());
    st->config.cap_factor = m.at("cap_factor").get<double>();
    st->config.max_subproblems = m.at("max_subproblems").get<std::size_t>();
    st->db_digest = database_digest(db);
    for (const auto& pj : m.at("pmtds")) st->pmtds.push_back(pmtd_from_json(pj, q));
    for (const auto& r : m.at("rules")) {
      RulePlan p;
      for (const auto& s : r.at("s_targets")) p.rule.s_targets.push_back(RuleTarget{varset_from_json(s, names), {}});
      for (const auto& s : r.at("t_targets")) p.rule.t_targets.push_back(RuleTarget{varset_from_json(s, names), {}});
      p.status = status_from_name(r.at("status").get<std::string>());
      p.obj = parse_rational(r.at("obj").get<std::string>());
      p.online_target = varset_from_json(r.at("online_target"), names);
      if (r.contains("proof_s")) p.proof_s = proof_from_json(r["proof_s"], names);
      if (r.contains("proof_t")) p.proof_t = proof_from_json(r["proof_t"], names);
      RuleRun run;
      run.mode = bucket_mode_from_name(r.at("mode").get<std::string>());
      for (const auto& s : r.at("splits"))
        run.splits.push_back(SplitDescriptor{s.at("atom").get<int>(), varset_from_json(s.at("x"), names),
                                             varset_from_json(s.at("y"), names), s.at("threshold").get<double>()});
      run.subproblems = r.at("subproblems").get<std::size_t>();
      run.materialized = r.at("materialized").get<std::size_t>();
      run.aborted = r.at("aborted").get<std::size_t>();
      run.over_cap = r.at("over_cap").get<std::size_t>();
      st->plans.push_back(std::move(p));
      st->runs.push_back(std::move(run));
    }
    const auto& c = m.at("counters");
    st->counters.tuples_scanned = c.at("tuples_scanned").get<std::uint64_t>();
    st->counters.hash_probes = c.at("hash_probes").get<std::uint64_t>();
    st->counters.s_view_probes = c.at("s_view_probes").get<std::uint64_t>();
    st->counters.s_view_scans = c.at("s_view_scans").get<std::uint64_t>();
    st->counters.tuples_materialized = c.at("tuples_materialized").get<std::uint64_t>();
    for (const auto& v : m.at("s_views")) {
      VarSet schema = varset_from_json(v.at("schema"), names);
      auto rel = parse_view(read_file(fs::path(dir) / v.at("file").get<std::string>()), q, schema, db.dict);
      if (rel.size() != v.at("size").get<std::size_t>()) throw ConfigError("view size does not match the manifest");
      st->s_views.emplace(schema, std::move(rel));
    }
    auto jj = nlohmann::json::parse(read_file(fs::path(dir) / "j_index.json"));
    for (const auto& e : jj) st->j_index.push_back(JEntry{e.at("rule").get<int>(), e.at("parts").get<std::vector<int>>()});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed store: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("malformed store: ") + e.what());
  }
  bind_store_atoms(*st, db);
  std::map<int, SplitLayout> layouts;
  for (const auto& e : st->j_index) {
    if (e.rule < 0 || e.rule >= static_cast<int>(st->runs.size())) throw ConfigError("online entry names no rule");
    const auto& run = st->runs[e.rule];
    if (e.parts.empty()) continue;
    if (e.parts.size() != run.splits.size()) throw ConfigError("online entry does not match the rule splits");
    auto it = layouts.find(e.rule);
    if (it == layouts.end()) it = layouts.emplace(e.rule, layout_splits(st->atoms, run.splits, run.mode)).first;
    const auto& L = it->second;
    for (std::size_t k = 0; k < e.parts.size(); ++k)
      if (e.parts[k] < 0 || static_cast<std::size_t>(e.parts[k]) >= L.part_count[k])
        throw ConfigError("split parts differ from the stored layout");
    for (std::size_t a = 0; a < st->atoms.size(); ++a) {
      auto key = atom_key(L, static_cast<int>(a), e.parts);
      auto g = L.groups[a].find(key);
      if (g == L.groups[a].end()) throw ConfigError("online subproblem has an empty sub-table");
      st->sub_tables.emplace(PreprocessedStore::SubKey{e.rule, static_cast<int>(a), key},
                             PreprocessedStore::SubTable{g->second, nullptr});
    }
  }
  OpCounters saved = st->counters;
  seal(*st);
  st->counters = saved;
  return st;
}

}  // namespace cqap
