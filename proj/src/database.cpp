#include "cqap/database.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace cqap {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (true) {
    auto e = line.find('\t', b);
    out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
    if (e == std::string::npos) break;
    b = e + 1;
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

constexpr Value kUnknownBase = Value(1) << 63;

}  // namespace

Value Dictionary::intern(const std::string& s) {
  auto it = ids_.find(s);
  if (it != ids_.end()) return it->second;
  Value id = strings_.size();
  strings_.push_back(s);
  ids_.emplace(s, id);
  return id;
}

std::optional<Value> Dictionary::find(const std::string& s) const {
  auto it = ids_.find(s);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Dictionary::lookup(Value v) const {
  if (v >= strings_.size()) throw InvalidArgument("value " + std::to_string(v) + " is not in the dictionary");
  return strings_[v];
}

void Dictionary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  for (std::size_t i = 0; i < strings_.size(); ++i) out << i << '\t' << strings_[i] << '\n';
}

Dictionary Dictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  Dictionary d;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw InvalidArgument("malformed dictionary line in " + path);
    Value id = std::stoull(line.substr(0, tab));
    if (id != d.strings_.size()) throw InvalidArgument("dictionary ids must be dense and ordered in " + path);
    d.intern(line.substr(tab + 1));
  }
  return d;
}

std::size_t Database::size() const {
  std::size_t s = 0;
  for (const auto& [_, t] : tables) s += t.rows.size();
  return s;
}

std::size_t Database::max_table_size() const {
  std::size_t s = 0;
  for (const auto& [_, t] : tables) s = std::max(s, t.rows.size());
  return s;
}

void Database::add_table(Table t) {
  for (const auto& r : t.rows)
    if (r.size() != t.columns.size()) throw InvalidArgument("row arity mismatch in table " + t.name);
  std::sort(t.rows.begin(), t.rows.end());
  t.rows.erase(std::unique(t.rows.begin(), t.rows.end()), t.rows.end());
  std::string name = t.name;
  tables[name] = std::move(t);
}

Table read_table_tsv(const std::string& path, const std::string& name, Dictionary& dict) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  Table t;
  t.name = name;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line.rfind("#schema", 0) == 0) {
      t.columns = split_ws(line.substr(7));
      header = true;
      continue;
    }
    if (line[0] == '#') continue;
    auto cells = split_tabs(line);
    if (!header) {
      for (std::size_t i = 0; i < cells.size(); ++i) t.columns.push_back("c" + std::to_string(i + 1));
      header = true;
    }
    if (cells.size() != t.columns.size()) throw InvalidArgument("row arity mismatch in " + path);
    Tuple row;
    for (const auto& c : cells) row.push_back(dict.intern(c));
    t.rows.push_back(std::move(row));
  }
  std::sort(t.rows.begin(), t.rows.end());
  t.rows.erase(std::unique(t.rows.begin(), t.rows.end()), t.rows.end());
  return t;
}

void write_table_tsv(const Table& t, const Dictionary& dict, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << "#schema";
  for (const auto& c : t.columns) out << ' ' << c;
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << dict.lookup(r[i]);
    out << '\n';
  }
}

Database load_database(const std::string& dir) {
  Database db;
  fs::path d(dir);
  if (!fs::is_directory(d)) throw InvalidArgument("not a data directory: " + dir);
  if (fs::exists(d / "dict.tsv")) db.dict = Dictionary::load((d / "dict.tsv").string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(d))
    if (e.path().extension() == ".tsv" && e.path().filename() != "dict.tsv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) db.add_table(read_table_tsv(f.string(), f.stem().string(), db.dict));
  return db;
}

void save_database(const Database& db, const std::string& dir) {
  fs::create_directories(dir);
  db.dict.save((fs::path(dir) / "dict.tsv").string());
  for (const auto& [name, t] : db.tables) write_table_tsv(t, db.dict, (fs::path(dir) / (name + ".tsv")).string());
}

Relation bind_atom(const Database& db, const Cqap& q, int atom) {
  const Atom& a = q.atoms.at(atom);
  auto it = db.tables.find(a.relation);
  if (it == db.tables.end()) throw InvalidArgument("database has no table '" + a.relation + "'");
  const Table& t = it->second;
  if (t.columns.size() != a.vars.size())
    throw InvalidArgument("table '" + a.relation + "' has " + std::to_string(t.columns.size()) +
                          " columns but the atom has " + std::to_string(a.vars.size()));
  // For each variable of the atom, the first column carrying it.
  std::vector<int> first_col(kMaxVars, -1);
  for (std::size_t c = 0; c < a.vars.size(); ++c)
    if (first_col[a.vars[c]] < 0) first_col[a.vars[c]] = static_cast<int>(c);
  auto members = a.varset.members();
  std::vector<Tuple> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    bool ok = true;
    for (std::size_t c = 0; c < a.vars.size() && ok; ++c) ok = r[c] == r[first_col[a.vars[c]]];
    if (!ok) continue;
    Tuple out;
    out.reserve(members.size());
    for (int v : members) out.push_back(r[first_col[v]]);
    rows.push_back(std::move(out));
  }
  return Relation(a.relation, a.varset, std::move(rows));
}

std::vector<Relation> bind_atoms(const Database& db, const Cqap& q) {
  std::vector<Relation> out;
  for (int i = 0; i < static_cast<int>(q.atoms.size()); ++i) out.push_back(bind_atom(db, q, i));
  return out;
}

BoundAssignment measured_assignment(const Database& db, std::size_t request_size) {
  auto lg = [](std::size_t v) {
    double l = v <= 1 ? 0.0 : std::log2(static_cast<double>(v));
    Rational r(static_cast<long>(std::llround(l * 1024.0)), 1024);
    r.canonicalize();
    return r;
  };
  return BoundAssignment::standard(lg(db.max_table_size()), lg(request_size));
}

std::vector<std::string> check_constraints(const Database& db, const Cqap& q, const BoundAssignment& real_log2) {
  std::vector<std::string> errors;
  for (const auto& c : q.dc) {
    Relation r = bind_atom(db, q, c.atom);
    std::uint64_t m = c.x.empty() ? project(r, c.y).size() : degree(r, c.x, c.y).max;
    double limit = std::exp2(to_double(c.bound.log_value(real_log2))) * (1.0 + 1e-3);
    if (static_cast<double>(m) > limit)
      errors.push_back("constraint on " + c.guard + " (" + q.set_label(c.x) + " -> " + q.set_label(c.y) +
                       ") <= " + c.bound.to_string() + " violated: " + std::to_string(m));
  }
  return errors;
}

Relation parse_requests(const std::string& text, const Cqap& q, const Dictionary& dict) {
  auto members = q.access.members();
  std::vector<int> order;  // file column -> position in A
  for (std::size_t i = 0; i < members.size(); ++i) order.push_back(static_cast<int>(i));
  std::istringstream in(text);
  std::string line;
  std::vector<Tuple> rows;
  std::map<std::string, Value> unknown;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line.rfind("#schema", 0) == 0) {
      auto names = split_ws(line.substr(7));
      if (names.size() != members.size()) throw InvalidArgument("request header does not match the access variables");
      order.clear();
      for (const auto& n : names) {
        int v = q.var_index(n);
        if (v < 0 || !q.access.contains(v)) throw InvalidArgument("request column '" + n + "' is not an access variable");
        order.push_back(q.access.rank_of(v));
      }
      continue;
    }
    if (line[0] == '#') continue;
    auto cells = members.empty() ? std::vector<std::string>{} : split_tabs(line);
    if (cells.size() != members.size()) throw InvalidArgument("request arity does not match the access variables");
    Tuple t(members.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto id = dict.find(cells[i]);
      if (!id) {
        auto it = unknown.find(cells[i]);
        if (it == unknown.end()) it = unknown.emplace(cells[i], kUnknownBase + unknown.size()).first;
        id = it->second;
      }
      t[order[i]] = *id;
    }
    rows.push_back(std::move(t));
  }
  return Relation("Q", q.access, std::move(rows));
}

Relation read_requests_tsv(const std::string& path, const Cqap& q, const Dictionary& dict) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_requests(ss.str(), q, dict);
}

std::string format_relation(const Relation& r, const Cqap& q, const Dictionary& dict) {
  std::ostringstream out;
  out << "#schema";
  for (const auto& n : q.set_names(r.schema())) out << ' ' << n;
  out << '\n';
  std::vector<std::string> lines;
  for (const auto& row : r.rows()) {
    std::string s;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += '\t';
      s += row[i] >= kUnknownBase ? "?" + std::to_string(row[i] - kUnknownBase) : dict.lookup(row[i]);
    }
    lines.push_back(std::move(s));
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) out << l << '\n';
  return out.str();
}

}  // namespace cqap
