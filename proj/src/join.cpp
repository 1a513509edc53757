#include "cqap/join.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <array>

namespace cqap {

TrieIndex::TrieIndex(const Relation& r) : schema_(r.schema()), size_(r.size()) {
  auto members = schema_.members();
  const unsigned k = static_cast<unsigned>(members.size());
  maps_.resize(1u << k);
  for (unsigned c = 0; c < (1u << k); ++c) {
    VarSet key;
    for (unsigned i = 0; i < k; ++i)
      if (c >> i & 1u) key |= VarSet::single(members[i]);
    auto kpos = positions_of(schema_, key);
    auto rest = (schema_ - key).members();
    auto& m = maps_[c];
    m.reserve(r.size());
    for (const auto& row : r.rows()) {
      auto& e = m[pick(row, kpos)];
      if (e.ext.empty()) e.ext.resize(rest.size());
      for (std::size_t j = 0; j < rest.size(); ++j) e.ext[j].push_back(row[schema_.rank_of(rest[j])]);
    }
    for (auto& [_, e] : m)
      for (auto& v : e.ext) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
      }
  }
}

unsigned TrieIndex::code(VarSet key) const {
  unsigned c = 0, i = 0;
  for (int v : schema_.members()) {
    if (key.contains(v)) c |= 1u << i;
    ++i;
  }
  return c;
}

const std::vector<Value>* TrieIndex::extensions(VarSet key, const Tuple& key_values, int v) const {
  const auto& m = maps_[code(key)];
  auto it = m.find(key_values);
  if (it == m.end()) return nullptr;
  VarSet rest = schema_ - key;
  return &it->second.ext[rest.rank_of(v)];
}

bool TrieIndex::contains(VarSet key, const Tuple& key_values) const {
  const auto& m = maps_[code(key)];
  return m.find(key_values) != m.end();
}

namespace {

class GenericJoin {
 public:
  GenericJoin(const std::vector<JoinInput>& inputs, VarSet out, OpCounters* counters, std::size_t limit)
      : in_(inputs), out_(out), counters_(counters), limit_(limit) {
    for (const auto& i : in_) all_ |= i.relation->schema();
    if (!out_.subset_of(all_)) throw InvalidArgument("join output variables are not covered by the inputs");
  }

  JoinResult run() {
    for (const auto& i : in_)
      if (i.relation->empty()) return {Relation("join", out_), false};
    bind_outputs();
    return {Relation("join", out_, std::move(results_)), overflow_};
  }

 private:
  Tuple key_values(VarSet key) const {
    Tuple t;
    for (int v : key.members()) t.push_back(vals_[v]);
    return t;
  }

  void count_probe(const JoinInput& in) {
    if (!counters_) return;
    (in.is_view ? counters_->s_view_probes : counters_->hash_probes) += 1;
  }

  // Smallest candidate list for v, or nullptr when some input has none.
  const std::vector<Value>* candidates(int v, int* owner) {
    const std::vector<Value>* best = nullptr;
    for (std::size_t i = 0; i < in_.size(); ++i) {
      VarSet s = in_[i].relation->schema();
      if (!s.contains(v)) continue;
      VarSet key = s & bound_;
      count_probe(in_[i]);
      const auto* list = in_[i].index->extensions(key, key_values(key), v);
      if (!list) {
        *owner = static_cast<int>(i);
        return nullptr;
      }
      if (!best || list->size() < best->size()) {
        best = list;
        *owner = static_cast<int>(i);
      }
    }
    return best;
  }

  // Picks the unbound variable of `pool` with the smallest candidate list.
  bool choose(VarSet pool, int* var, const std::vector<Value>** list, int* owner) {
    *var = -1;
    for (int v : (pool - bound_).members()) {
      int o = -1;
      const auto* l = candidates(v, &o);
      if (!l) return false;
      if (*var < 0 || l->size() < (*list)->size()) {
        *var = v;
        *list = l;
        *owner = o;
      }
    }
    return true;
  }

  bool accept(int v, Value a, int owner) {
    vals_[v] = a;
    for (std::size_t i = 0; i < in_.size(); ++i) {
      if (static_cast<int>(i) == owner) continue;
      VarSet s = in_[i].relation->schema();
      if (!s.contains(v)) continue;
      VarSet key = (s & bound_) | VarSet::single(v);
      count_probe(in_[i]);
      if (!in_[i].index->contains(key, key_values(key))) return false;
    }
    return true;
  }

  void scan(const JoinInput& owner, std::size_t n) {
    if (!counters_) return;
    counters_->tuples_scanned += n;
    if (owner.is_view) counters_->s_view_scans += n;
  }

  void bind_outputs() {
    if (overflow_) return;
    if (out_.subset_of(bound_)) {
      if (exists()) {
        if (results_.size() >= limit_) {
          overflow_ = true;
          return;
        }
        results_.push_back(key_values(out_));
      }
      return;
    }
    int v, owner;
    const std::vector<Value>* list = nullptr;
    if (!choose(out_, &v, &list, &owner)) return;
    VarSet saved = bound_;
    for (Value a : *list) {
      scan(in_[owner], 1);
      if (!accept(v, a, owner)) continue;
      bound_ = saved | VarSet::single(v);
      // Prune partial output bindings that do not extend to a join tuple.
      if (out_.subset_of(bound_) || exists()) bind_outputs();
      bound_ = saved;
      if (overflow_) return;
    }
  }

  bool exists() {
    if (all_.subset_of(bound_)) return true;
    int v, owner;
    const std::vector<Value>* list = nullptr;
    if (!choose(all_, &v, &list, &owner)) return false;
    VarSet saved = bound_;
    bool found = false;
    for (Value a : *list) {
      scan(in_[owner], 1);
      if (!accept(v, a, owner)) continue;
      bound_ = saved | VarSet::single(v);
      found = exists();
      bound_ = saved;
      if (found) break;
    }
    return found;
  }

  const std::vector<JoinInput>& in_;
  VarSet out_, all_, bound_;
  OpCounters* counters_;
  std::size_t limit_;
  std::array<Value, kMaxVars> vals_{};
  std::vector<Tuple> results_;
  bool overflow_ = false;
};

}  // namespace

JoinResult generic_join(const std::vector<JoinInput>& inputs, VarSet out, OpCounters* counters, std::size_t limit) {
  return GenericJoin(inputs, out, counters, limit).run();
}

Relation generic_join(const std::vector<Relation>& inputs, VarSet out) {
  std::vector<TrieIndex> idx;
  idx.reserve(inputs.size());
  for (const auto& r : inputs) idx.emplace_back(r);
  std::vector<JoinInput> in;
  for (std::size_t i = 0; i < inputs.size(); ++i) in.push_back({&inputs[i], &idx[i], false});
  return generic_join(in, out, nullptr).relation;
}

Relation fold_join(const std::vector<Relation>& rels, VarSet out) {
  if (rels.empty()) throw InvalidArgument("join of no relations");
  std::vector<bool> used(rels.size(), false);
  // Start from the smallest relation, then repeatedly take the relation sharing
  // the most variables with the running result.
  std::size_t first = 0;
  for (std::size_t i = 1; i < rels.size(); ++i)
    if (rels[i].size() < rels[first].size()) first = i;
  Relation acc = rels[first];
  used[first] = true;
  for (std::size_t step = 1; step < rels.size(); ++step) {
    int best = -1, best_shared = -1;
    for (std::size_t i = 0; i < rels.size(); ++i) {
      if (used[i]) continue;
      int shared = (rels[i].schema() & acc.schema()).size();
      if (shared > best_shared || (shared == best_shared && rels[i].size() < rels[best].size())) {
        best = static_cast<int>(i);
        best_shared = shared;
      }
    }
    used[best] = true;
    acc = natural_join(acc, rels[best], "join");
    if (acc.empty()) break;
    // Drop variables no longer needed.
    VarSet needed = out;
    for (std::size_t i = 0; i < rels.size(); ++i)
      if (!used[i]) needed |= rels[i].schema();
    acc = project(acc, acc.schema() & needed);
  }
  if (acc.empty()) return Relation("join", out);
  return project(acc, out);
}

Relation oracle_answer(const std::vector<Relation>& atoms, const Cqap& q, const Relation& request) {
  if (request.schema() != q.access) throw InvalidArgument("request schema differs from the access variables");
  std::vector<Relation> rels;
  if (!q.access.empty()) rels.push_back(request);
  for (const auto& a : atoms) rels.push_back(a);
  if (q.access.empty() && request.empty()) return Relation("answer", q.head);
  return fold_join(rels, q.head).renamed("answer");
}

Relation oracle_answer(const Database& db, const Cqap& q, const Relation& request) {
  return oracle_answer(bind_atoms(db, q), q, request);
}

}  // namespace cqap
