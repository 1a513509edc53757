#pragma once

#include "cqap/varset.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cqap {

using Value = std::uint64_t;
using Tuple = std::vector<Value>;

struct TupleHash {
  std::size_t operator()(const Tuple& t) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ t.size();
    for (Value v : t) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdull;
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
  }
};

struct OpCounters {
  std::uint64_t tuples_scanned = 0;
  std::uint64_t hash_probes = 0;
  std::uint64_t s_view_probes = 0;
  std::uint64_t s_view_scans = 0;
  std::uint64_t tuples_materialized = 0;

  OpCounters& operator+=(const OpCounters& o);
};

// Positions of the members of `sub` inside the ascending member list of `schema`.
std::vector<int> positions_of(VarSet schema, VarSet sub);

// Picks the values at `pos` out of `row`.
Tuple pick(std::span<const Value> row, const std::vector<int>& pos);

// A deduplicated, lexicographically sorted set of tuples over a variable set.
// Columns follow the ascending variable index order of the schema.
class Relation {
 public:
  Relation() = default;
  Relation(std::string name, VarSet schema);
  Relation(std::string name, VarSet schema, std::vector<Tuple> rows);

  const std::string& name() const { return name_; }
  VarSet schema() const { return schema_; }
  int arity() const { return schema_.size(); }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::vector<Tuple>& rows() const { return rows_; }
  const Tuple& row(std::size_t i) const { return rows_[i]; }

  bool contains(const Tuple& t) const;
  Relation renamed(std::string name) const;

  bool operator==(const Relation& o) const { return schema_ == o.schema_ && rows_ == o.rows_; }

 private:
  std::string name_;
  VarSet schema_;
  std::vector<Tuple> rows_;
};

// Hash index from the projection on `key` to the row ids carrying it.
class HashIndex {
 public:
  HashIndex() = default;
  HashIndex(const Relation& r, VarSet key);

  VarSet key() const { return key_; }
  const std::vector<std::uint32_t>* probe(const Tuple& key_values) const;
  std::size_t distinct_keys() const { return map_.size(); }

 private:
  VarSet key_;
  std::unordered_map<Tuple, std::vector<std::uint32_t>, TupleHash> map_;
};

Relation project(const Relation& r, VarSet s);

// Rows of r whose projection on r.schema & s.schema occurs in s.
Relation semijoin(const Relation& r, const Relation& s, OpCounters* counters = nullptr);

// Same, probing a prebuilt index on s keyed by the shared variables.
// When `s_is_view` is set the probes are booked as S-view probes.
Relation semijoin(const Relation& r, const Relation& s, const HashIndex& s_index, OpCounters* counters,
                  bool s_is_view);

struct DegreeStats {
  std::map<Tuple, std::uint64_t> counts;
  std::uint64_t max = 0;
};

// deg(y | t_x) = |project(select_{x = t_x} r, y)| for every x-value present.
DegreeStats degree(const Relation& r, VarSet x, VarSet y);

// Natural join of two relations.
Relation natural_join(const Relation& a, const Relation& b, const std::string& name = "");

Relation union_of(const Relation& a, const Relation& b);
Relation difference(const Relation& a, const Relation& b);

}  // namespace cqap
