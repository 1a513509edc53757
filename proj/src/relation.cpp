#include "cqap/relation.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <unordered_set>

namespace cqap {

OpCounters& OpCounters::operator+=(const OpCounters& o) {
  tuples_scanned += o.tuples_scanned;
  hash_probes += o.hash_probes;
  s_view_probes += o.s_view_probes;
  s_view_scans += o.s_view_scans;
  tuples_materialized += o.tuples_materialized;
  return *this;
}

std::vector<int> positions_of(VarSet schema, VarSet sub) {
  if (!sub.subset_of(schema)) throw InvalidArgument("variable set is not part of the schema");
  std::vector<int> pos;
  for (int v : sub.members()) pos.push_back(schema.rank_of(v));
  return pos;
}

Tuple pick(std::span<const Value> row, const std::vector<int>& pos) {
  Tuple t;
  t.reserve(pos.size());
  for (int p : pos) t.push_back(row[p]);
  return t;
}

Relation::Relation(std::string name, VarSet schema) : name_(std::move(name)), schema_(schema) {}

Relation::Relation(std::string name, VarSet schema, std::vector<Tuple> rows)
    : name_(std::move(name)), schema_(schema), rows_(std::move(rows)) {
  const std::size_t arity = static_cast<std::size_t>(schema_.size());
  for (const auto& r : rows_)
    if (r.size() != arity) throw InvalidArgument("row arity does not match schema of " + name_);
  std::sort(rows_.begin(), rows_.end());
  rows_.erase(std::unique(rows_.begin(), rows_.end()), rows_.end());
}

bool Relation::contains(const Tuple& t) const { return std::binary_search(rows_.begin(), rows_.end(), t); }

Relation Relation::renamed(std::string name) const {
  Relation r = *this;
  r.name_ = std::move(name);
  return r;
}

HashIndex::HashIndex(const Relation& r, VarSet key) : key_(key) {
  auto pos = positions_of(r.schema(), key);
  for (std::size_t i = 0; i < r.size(); ++i) map_[pick(r.row(i), pos)].push_back(static_cast<std::uint32_t>(i));
}

const std::vector<std::uint32_t>* HashIndex::probe(const Tuple& key_values) const {
  auto it = map_.find(key_values);
  return it == map_.end() ? nullptr : &it->second;
}

Relation project(const Relation& r, VarSet s) {
  if (!s.subset_of(r.schema())) throw InvalidArgument("projection outside schema of " + r.name());
  auto pos = positions_of(r.schema(), s);
  std::vector<Tuple> rows;
  rows.reserve(r.size());
  for (const auto& row : r.rows()) rows.push_back(pick(row, pos));
  return Relation(r.name(), s, std::move(rows));
}

Relation semijoin(const Relation& r, const Relation& s, OpCounters* counters) {
  VarSet shared = r.schema() & s.schema();
  HashIndex idx(s, shared);
  if (counters) counters->tuples_scanned += s.size();
  return semijoin(r, s, idx, counters, false);
}

Relation semijoin(const Relation& r, const Relation& s, const HashIndex& s_index, OpCounters* counters,
                  bool s_is_view) {
  VarSet shared = r.schema() & s.schema();
  if (s_index.key() != shared) throw InvalidArgument("semijoin index key does not match shared variables");
  if (shared.empty()) {
    if (counters) {
      counters->tuples_scanned += r.size();
      (s_is_view ? counters->s_view_probes : counters->hash_probes) += 1;
    }
    return s.empty() ? Relation(r.name(), r.schema()) : r;
  }
  auto pos = positions_of(r.schema(), shared);
  std::vector<Tuple> out;
  for (const auto& row : r.rows()) {
    if (counters) {
      counters->tuples_scanned += 1;
      (s_is_view ? counters->s_view_probes : counters->hash_probes) += 1;
    }
    if (s_index.probe(pick(row, pos))) out.push_back(row);
  }
  return Relation(r.name(), r.schema(), std::move(out));
}

DegreeStats degree(const Relation& r, VarSet x, VarSet y) {
  if (!x.proper_subset_of(y) || !y.subset_of(r.schema())) throw InvalidArgument("degree needs x < y <= schema");
  Relation py = project(r, y);
  auto pos = positions_of(y, x);
  DegreeStats st;
  for (const auto& row : py.rows()) {
    auto& c = st.counts[pick(row, pos)];
    ++c;
    st.max = std::max(st.max, c);
  }
  return st;
}

Relation natural_join(const Relation& a, const Relation& b, const std::string& name) {
  VarSet shared = a.schema() & b.schema();
  VarSet out_schema = a.schema() | b.schema();
  const Relation& small = a.size() <= b.size() ? a : b;
  const Relation& large = a.size() <= b.size() ? b : a;
  HashIndex idx(small, shared);
  auto lpos = positions_of(large.schema(), shared);
  std::vector<std::pair<bool, int>> src;  // (from large, position)
  for (int v : out_schema.members()) {
    if (large.schema().contains(v))
      src.emplace_back(true, large.schema().rank_of(v));
    else
      src.emplace_back(false, small.schema().rank_of(v));
  }
  std::vector<Tuple> rows;
  for (const auto& lr : large.rows()) {
    const auto* hits = idx.probe(pick(lr, lpos));
    if (!hits) continue;
    for (auto id : *hits) {
      const auto& sr = small.row(id);
      Tuple t;
      t.reserve(src.size());
      for (auto [from_large, p] : src) t.push_back(from_large ? lr[p] : sr[p]);
      rows.push_back(std::move(t));
    }
  }
  return Relation(name.empty() ? a.name() + "*" + b.name() : name, out_schema, std::move(rows));
}

Relation union_of(const Relation& a, const Relation& b) {
  if (a.schema() != b.schema()) throw InvalidArgument("union of relations with different schemas");
  std::vector<Tuple> rows;
  rows.reserve(a.size() + b.size());
  std::set_union(a.rows().begin(), a.rows().end(), b.rows().begin(), b.rows().end(), std::back_inserter(rows));
  return Relation(a.name(), a.schema(), std::move(rows));
}

Relation difference(const Relation& a, const Relation& b) {
  if (a.schema() != b.schema()) throw InvalidArgument("difference of relations with different schemas");
  std::vector<Tuple> rows;
  std::set_difference(a.rows().begin(), a.rows().end(), b.rows().begin(), b.rows().end(), std::back_inserter(rows));
  return Relation(a.name(), a.schema(), std::move(rows));
}

}  // namespace cqap
