#include "cqap/workload.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>

namespace cqap {

Database random_database(const Cqap& q, std::size_t rows, std::uint64_t seed, double skew) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const auto dom = std::max<std::size_t>(10, static_cast<std::size_t>(3 * std::sqrt(static_cast<double>(rows))));
  Database db;
  for (std::size_t i = 0; i < dom; ++i) db.dict.intern("v" + std::to_string(i));
  for (const auto& a : q.atoms) {
    if (db.tables.count(a.relation)) continue;
    Table t;
    t.name = a.relation;
    const auto arity = a.vars.size();
    for (std::size_t i = 0; i < arity; ++i) t.columns.push_back("c" + std::to_string(i));
    const double space = std::pow(static_cast<double>(dom), static_cast<double>(arity));
    const auto want = static_cast<std::size_t>(std::min(static_cast<double>(rows), space / 2));
    std::set<Tuple> seen;
    for (std::size_t tries = 0; seen.size() < want && tries < 64 * rows + 1024; ++tries) {
      Tuple r(arity);
      for (auto& v : r) v = std::min<Value>(dom - 1, static_cast<Value>(std::pow(u(rng), skew) * dom));
      seen.insert(std::move(r));
    }
    t.rows.assign(seen.begin(), seen.end());
    db.add_table(std::move(t));
  }
  return db;
}

namespace {

// A random body tuple by extending partial bindings atom by atom; empty on a dead end.
std::optional<std::vector<Value>> sample_body(const Cqap& q, const std::vector<Relation>& atoms, std::mt19937_64& rng) {
  std::vector<Value> val(q.n(), 0);
  VarSet bound;
  std::vector<int> order(atoms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  // Grow along shared variables so that later atoms are filtered.
  std::vector<int> seq;
  std::vector<bool> used(atoms.size(), false);
  seq.push_back(static_cast<int>(rng() % atoms.size()));
  used[seq[0]] = true;
  VarSet cover = atoms[seq[0]].schema();
  while (seq.size() < atoms.size()) {
    int next = -1;
    for (int i : order)
      if (!used[i] && (next < 0 || !(atoms[i].schema() & cover).empty())) {
        next = i;
        if (!(atoms[i].schema() & cover).empty()) break;
      }
    used[next] = true;
    seq.push_back(next);
    cover = cover | atoms[next].schema();
  }
  for (int i : seq) {
    const auto& r = atoms[i];
    const auto vars = r.schema().members();
    std::vector<std::size_t> ok;
    for (std::size_t k = 0; k < r.size(); ++k) {
      bool match = true;
      for (std::size_t c = 0; c < vars.size() && match; ++c)
        if (bound.contains(vars[c]) && r.row(k)[c] != val[vars[c]]) match = false;
      if (match) ok.push_back(k);
    }
    if (ok.empty()) return std::nullopt;
    const auto& row = r.row(ok[rng() % ok.size()]);
    for (std::size_t c = 0; c < vars.size(); ++c) val[vars[c]] = row[c];
    bound = bound | r.schema();
  }
  return val;
}

Tuple draw_request(const Cqap& q, const std::vector<Relation>& atoms, const std::vector<std::vector<Value>>& domains,
                   bool hit, std::mt19937_64& rng) {
  const auto acc = q.access.members();
  if (hit)
    for (int attempt = 0; attempt < 32; ++attempt)
      if (auto body = sample_body(q, atoms, rng)) {
        Tuple t;
        for (int v : acc) t.push_back((*body)[v]);
        return t;
      }
  Tuple t;
  for (int v : acc) {
    const auto& d = domains[v];
    t.push_back(d.empty() ? Value{0} : d[rng() % d.size()]);
  }
  return t;
}

std::vector<std::vector<Value>> active_domains(const Cqap& q, const std::vector<Relation>& atoms) {
  std::vector<std::set<Value>> dom(q.n());
  for (const auto& r : atoms) {
    const auto vars = r.schema().members();
    for (const auto& row : r.rows())
      for (std::size_t c = 0; c < vars.size(); ++c) dom[vars[c]].insert(row[c]);
  }
  std::vector<std::vector<Value>> out;
  for (auto& d : dom) out.emplace_back(d.begin(), d.end());
  return out;
}

}  // namespace

std::vector<Relation> random_requests(const Cqap& q, const std::vector<Relation>& atoms, std::size_t count,
                                      std::uint64_t seed, double hit_fraction) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(hit_fraction);
  const auto domains = active_domains(q, atoms);
  std::vector<Relation> out;
  for (std::size_t i = 0; i < count; ++i)
    out.emplace_back("Q", q.access, std::vector<Tuple>{draw_request(q, atoms, domains, coin(rng), rng)});
  return out;
}

Relation random_batch(const Cqap& q, const std::vector<Relation>& atoms, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const auto domains = active_domains(q, atoms);
  std::vector<Tuple> rows;
  for (std::size_t i = 0; i < size; ++i) rows.push_back(draw_request(q, atoms, domains, coin(rng), rng));
  return Relation("Q", q.access, std::move(rows));
}

}  // namespace cqap
