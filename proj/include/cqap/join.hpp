#pragma once

#include "cqap/database.hpp"
#include "cqap/query.hpp"
#include "cqap/relation.hpp"

#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

namespace cqap {

// Hash maps from every projection key of a relation to the sorted distinct
// values of each remaining variable. Built once, probed by generic_join.
class TrieIndex {
 public:
  TrieIndex() = default;
  explicit TrieIndex(const Relation& r);

  VarSet schema() const { return schema_; }
  std::size_t size() const { return size_; }

  // Distinct values of v among rows agreeing with key_values on key; nullptr when none.
  const std::vector<Value>* extensions(VarSet key, const Tuple& key_values, int v) const;
  bool contains(VarSet key, const Tuple& key_values) const;

 private:
  struct Entry {
    std::vector<std::vector<Value>> ext;  // by rank of v inside schema - key
  };
  unsigned code(VarSet key) const;

  VarSet schema_;
  std::size_t size_ = 0;
  std::vector<std::unordered_map<Tuple, Entry, TupleHash>> maps_;
};

struct JoinInput {
  const Relation* relation = nullptr;
  const TrieIndex* index = nullptr;
  bool is_view = false;
};

struct JoinResult {
  Relation relation;
  bool overflow = false;  // stopped after `limit` output tuples
};

// Worst-case optimal generic join projected onto `out`. Output variables are
// bound first, the rest only checked for existence. Candidate lists are
// iterated from the smallest input and probed in the others.
JoinResult generic_join(const std::vector<JoinInput>& inputs, VarSet out, OpCounters* counters,
                        std::size_t limit = std::numeric_limits<std::size_t>::max());

// Convenience wrapper that builds temporary indexes.
Relation generic_join(const std::vector<Relation>& inputs, VarSet out);

// Projection onto `out` of the join of `rels`, by a plain left-deep hash-join fold.
Relation fold_join(const std::vector<Relation>& rels, VarSet out);

// Ground truth: projection onto H of request joined with every body atom.
Relation oracle_answer(const Database& db, const Cqap& q, const Relation& request);
Relation oracle_answer(const std::vector<Relation>& atoms, const Cqap& q, const Relation& request);

}  // namespace cqap
