#pragma once

#include "cqap/bound.hpp"
#include "cqap/query.hpp"
#include "cqap/relation.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cqap {

// Interns external string values as dense 64-bit identifiers.
class Dictionary {
 public:
  Value intern(const std::string& s);
  std::optional<Value> find(const std::string& s) const;
  const std::string& lookup(Value v) const;
  std::size_t size() const { return strings_.size(); }

  void save(const std::string& path) const;
  static Dictionary load(const std::string& path);

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, Value> ids_;
};

// A stored table with positional columns, bound to atoms by position.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<Tuple> rows;  // deduplicated and sorted
};

struct Database {
  std::map<std::string, Table> tables;
  Dictionary dict;

  std::size_t size() const;  // total number of stored tuples
  std::size_t max_table_size() const;
  void add_table(Table t);
};

// Reads every `<name>.tsv` under dir, interning through dir/dict.tsv when present.
Database load_database(const std::string& dir);
void save_database(const Database& db, const std::string& dir);

Table read_table_tsv(const std::string& path, const std::string& name, Dictionary& dict);
void write_table_tsv(const Table& t, const Dictionary& dict, const std::string& path);

// The relation of atom i over its variable set; repeated variables filter equal columns.
Relation bind_atom(const Database& db, const Cqap& q, int atom);
std::vector<Relation> bind_atoms(const Database& db, const Cqap& q);

// Log-scale assignment measured on the data: N = max table size, Q = |request|.
BoundAssignment measured_assignment(const Database& db, std::size_t request_size);

// Checks every constraint of q against the data. Returns the violations.
std::vector<std::string> check_constraints(const Database& db, const Cqap& q, const BoundAssignment& real_log2);

// Requests over A in ascending variable order; a `#schema` header reorders columns.
// Unknown values get fresh identifiers that match nothing stored.
Relation read_requests_tsv(const std::string& path, const Cqap& q, const Dictionary& dict);
Relation parse_requests(const std::string& text, const Cqap& q, const Dictionary& dict);

// Sorted TSV rendering with a `#schema` header.
std::string format_relation(const Relation& r, const Cqap& q, const Dictionary& dict);

}  // namespace cqap
