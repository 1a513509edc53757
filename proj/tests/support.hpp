#pragma once

#include "cqap/database.hpp"
#include "cqap/query.hpp"
#include "cqap/relation.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cqap::testing {

inline std::string corpus(const std::string& rel) { return std::string(CQAP_CORPUS_DIR) + "/" + rel; }

inline Cqap corpus_query(const std::string& name) { return load_query(corpus("queries/" + name + ".cqap")); }

// Builds a database from integer rows, one table per relation name.
inline Database make_db(const Cqap& q, const std::map<std::string, std::vector<std::vector<int>>>& data) {
  Database db;
  for (const auto& a : q.atoms) {
    if (db.tables.count(a.relation)) continue;
    Table t;
    t.name = a.relation;
    for (std::size_t i = 0; i < a.vars.size(); ++i) t.columns.push_back("c" + std::to_string(i));
    auto it = data.find(a.relation);
    if (it != data.end())
      for (const auto& row : it->second) {
        Tuple r;
        for (int v : row) r.push_back(db.dict.intern(std::to_string(v)));
        t.rows.push_back(r);
      }
    std::sort(t.rows.begin(), t.rows.end());
    t.rows.erase(std::unique(t.rows.begin(), t.rows.end()), t.rows.end());
    db.add_table(std::move(t));
  }
  return db;
}

inline Relation request_of(const Cqap& q, Database& db, const std::vector<std::vector<int>>& rows) {
  std::vector<Tuple> out;
  for (const auto& row : rows) {
    Tuple t;
    for (int v : row) t.push_back(db.dict.intern(std::to_string(v)));
    out.push_back(t);
  }
  return Relation("Q", q.access, out);
}

// Backtracking over atom rows, written without the library join code.
inline std::set<Tuple> brute_force(const Database& db, const Cqap& q, const Relation& request) {
  std::set<Tuple> out;
  std::vector<Value> val(q.n());
  std::vector<bool> bound(q.n(), false);
  const auto acc = q.access.members();
  const auto head = q.head.members();
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == q.atoms.size()) {
      Tuple a;
      for (int v : acc) a.push_back(val[v]);
      if (!request.contains(a)) return;
      Tuple h;
      for (int v : head) h.push_back(val[v]);
      out.insert(h);
      return;
    }
    const auto& atom = q.atoms[i];
    for (const auto& row : db.tables.at(atom.relation).rows) {
      auto saved_val = val;
      auto saved_bound = bound;
      bool ok = true;
      for (std::size_t c = 0; c < atom.vars.size() && ok; ++c) {
        int v = atom.vars[c];
        if (bound[v] && val[v] != row[c]) ok = false;
        val[v] = row[c];
        bound[v] = true;
      }
      if (ok) rec(i + 1);
      val = saved_val;
      bound = saved_bound;
    }
  };
  rec(0);
  return out;
}

inline std::set<Tuple> rows_of(const Relation& r) { return {r.rows().begin(), r.rows().end()}; }

}  // namespace cqap::testing
