#include "cqap/query.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cqap {

namespace {

// Natural order: "x2" < "x10", ties broken lexicographically.
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t i2 = i, j2 = j;
      while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
      while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
      std::string na = a.substr(i, i2 - i), nb = b.substr(j, j2 - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size() - 1));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size() - 1));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = i2;
      j = j2;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

struct RawAtom {
  std::string relation;
  std::vector<std::string> vars;
  int line, col;
};

struct RawConstraint {
  bool access = false;
  std::string guard;
  bool size_form = false;
  std::vector<std::string> x, y;
  std::string bound;
  int line, col;
};

struct RawPmtdNode {
  std::vector<std::string> bag;
  bool materialized = false;
  int parent = -1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  Cqap run();

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }
  [[noreturn]] void fail_at(const std::string& msg, int line, int col) const { throw ParseError(msg, line, col); }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  bool at_end() const { return pos_ >= s_.size(); }
  void advance() {
    if (s_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  // Skips blanks and comments; stops at newline when `stop_at_newline`.
  void skip(bool stop_at_newline = false) {
    while (!at_end()) {
      char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == '\n' && stop_at_newline) {
        return;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }
  bool accept(const std::string& tok, bool inline_only = false) {
    skip(inline_only);
    if (s_.compare(pos_, tok.size(), tok) == 0) {
      for (std::size_t i = 0; i < tok.size(); ++i) advance();
      return true;
    }
    return false;
  }
  void expect(const std::string& tok, bool inline_only = false) {
    if (!accept(tok, inline_only)) fail("expected '" + tok + "'");
  }
  std::string ident(bool inline_only = false) {
    skip(inline_only);
    if (!is_ident_start(peek())) fail("expected identifier");
    std::size_t b = pos_;
    while (!at_end() && is_ident_char(peek())) advance();
    return s_.substr(b, pos_ - b);
  }
  bool keyword_ahead(const std::string& kw) {
    skip();
    if (s_.compare(pos_, kw.size(), kw) != 0) return false;
    std::size_t e = pos_ + kw.size();
    return e >= s_.size() || !is_ident_char(s_[e]);
  }
  // Comma separated identifiers up to (not including) `close`.
  std::vector<std::string> ident_list(const std::string& close, bool inline_only = false) {
    std::vector<std::string> out;
    skip(inline_only);
    if (s_.compare(pos_, close.size(), close) == 0) return out;
    out.push_back(ident(inline_only));
    while (accept(",", inline_only)) out.push_back(ident(inline_only));
    return out;
  }
  std::string rest_of_line() {
    skip(true);
    std::size_t b = pos_;
    while (!at_end() && peek() != '\n' && peek() != '#') advance();
    std::string t = s_.substr(b, pos_ - b);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    return t;
  }

  void parse_rule();
  void parse_constraint(bool access);
  void parse_pmtd();
  int parse_pmtd_node(std::vector<RawPmtdNode>& nodes, int parent);

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;

  bool have_rule_ = false;
  std::string name_;
  std::vector<std::string> head_, access_;
  int head_line_ = 0, head_col_ = 0;
  std::vector<RawAtom> atoms_;
  std::vector<RawConstraint> constraints_;
  std::vector<std::vector<RawPmtdNode>> pmtds_;
  std::vector<std::pair<int, int>> pmtd_pos_;
};

void Parser::parse_rule() {
  if (have_rule_) fail("only one query rule is allowed");
  have_rule_ = true;
  head_line_ = line_;
  head_col_ = col_;
  name_ = ident();
  expect("(");
  head_ = ident_list("|");
  skip();
  if (peek() == '|') {
    expect("|");
    access_ = ident_list(")");
  } else if (peek() != ')') {
    fail("expected '|' or ')'");
  }
  expect(")");
  expect(":-");
  do {
    skip();
    RawAtom a;
    a.line = line_;
    a.col = col_;
    a.relation = ident();
    expect("(");
    a.vars = ident_list(")");
    expect(")");
    if (a.vars.empty()) fail_at("atom " + a.relation + " has no variables", a.line, a.col);
    atoms_.push_back(std::move(a));
  } while (accept(","));
  expect(".");
}

void Parser::parse_constraint(bool access) {
  RawConstraint c;
  c.access = access;
  c.line = line_;
  c.col = col_;
  if (access) {
    accept(":", true);
    skip(true);
    if (peek() == '|') {
      expect("|", true);
      std::string q = ident(true);
      expect("|", true);
      c.size_form = true;
      c.guard = q;
      if (!accept("<=", true)) expect("=", true);
      c.bound = rest_of_line();
    } else {
      c.guard = "Q";
      expect("(", true);
      c.x = ident_list("->", true);
      expect("->", true);
      c.y = ident_list(")", true);
      expect(")", true);
      expect("<=", true);
      c.bound = rest_of_line();
    }
  } else {
    c.guard = ident(true);
    expect(":", true);
    skip(true);
    if (keyword_ahead("size")) {
      ident(true);
      c.size_form = true;
      if (!accept("<=", true)) expect("=", true);
      c.bound = rest_of_line();
    } else {
      expect("(", true);
      c.x = ident_list("->", true);
      expect("->", true);
      c.y = ident_list(")", true);
      expect(")", true);
      expect("<=", true);
      c.bound = rest_of_line();
    }
  }
  if (c.bound.empty()) fail("missing bound");
  constraints_.push_back(std::move(c));
}

int Parser::parse_pmtd_node(std::vector<RawPmtdNode>& nodes, int parent) {
  expect("{", true);
  RawPmtdNode node;
  node.bag = ident_list("}", true);
  expect("}", true);
  if (node.bag.empty()) fail("empty bag");
  node.materialized = accept("*", true);
  node.parent = parent;
  int id = static_cast<int>(nodes.size());
  nodes.push_back(std::move(node));
  if (accept("(", true)) {
    parse_pmtd_node(nodes, id);
    while (accept(",", true)) parse_pmtd_node(nodes, id);
    expect(")", true);
  }
  return id;
}

void Parser::parse_pmtd() {
  pmtd_pos_.emplace_back(line_, col_);
  std::vector<RawPmtdNode> nodes;
  parse_pmtd_node(nodes, -1);
  skip(true);
  if (!at_end() && peek() != '\n') fail("unexpected text after pmtd");
  pmtds_.push_back(std::move(nodes));
}

Cqap Parser::run() {
  while (true) {
    skip();
    if (at_end()) break;
    if (keyword_ahead("dc")) {
      ident();
      parse_constraint(false);
    } else if (keyword_ahead("ac")) {
      ident();
      parse_constraint(true);
    } else if (keyword_ahead("pmtd")) {
      ident();
      parse_pmtd();
    } else if (is_ident_start(peek())) {
      parse_rule();
    } else {
      fail(std::string("unexpected character '") + peek() + "'");
    }
  }
  if (!have_rule_) fail("no query rule found");

  Cqap q;
  q.name = name_;
  std::vector<std::string> vars;
  for (const auto& a : atoms_)
    for (const auto& v : a.vars)
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  if (static_cast<int>(vars.size()) > kMaxVars)
    fail_at("too many variables (limit " + std::to_string(kMaxVars) + ")", head_line_, head_col_);
  std::sort(vars.begin(), vars.end(), natural_less);
  q.var_names = vars;

  auto to_set = [&](const std::vector<std::string>& names, int line, int col) {
    VarSet s;
    for (const auto& v : names) {
      int i = q.var_index(v);
      if (i < 0) fail_at("unknown variable '" + v + "'", line, col);
      s |= VarSet::single(i);
    }
    return s;
  };

  for (const auto& ra : atoms_) {
    Atom a;
    a.relation = ra.relation;
    for (const auto& v : ra.vars) {
      a.vars.push_back(q.var_index(v));
      a.varset |= VarSet::single(q.var_index(v));
    }
    q.atoms.push_back(std::move(a));
  }
  q.access = to_set(access_, head_line_, head_col_);
  q.head = to_set(head_, head_line_, head_col_) | q.access;

  std::vector<bool> has_card(q.atoms.size(), false);
  bool has_access_card = false;
  for (const auto& rc : constraints_) {
    SymbolicBound bound;
    try {
      bound = SymbolicBound::parse(rc.bound);
    } catch (const InvalidArgument& e) {
      fail_at(e.what(), rc.line, rc.col);
    }
    if (rc.access) {
      DegreeConstraint c;
      c.guard = "Q";
      c.bound = bound;
      if (rc.size_form) {
        c.x = VarSet();
        c.y = q.access;
        has_access_card = true;
      } else {
        c.x = to_set(rc.x, rc.line, rc.col);
        c.y = to_set(rc.y, rc.line, rc.col) | c.x;
        if (!c.y.subset_of(q.access)) fail_at("access constraint outside the access variables", rc.line, rc.col);
        if (c.x.empty() && c.y == q.access) has_access_card = true;
      }
      if (c.y.empty()) fail_at("access constraint on an empty variable set", rc.line, rc.col);
      if (c.x == c.y) fail_at("degree constraint needs x strictly inside y", rc.line, rc.col);
      q.ac.push_back(std::move(c));
      continue;
    }
    bool found = false;
    if (rc.size_form) {
      for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        if (q.atoms[i].relation != rc.guard) continue;
        found = true;
        has_card[i] = true;
        q.dc.push_back(DegreeConstraint{VarSet(), q.atoms[i].varset, bound, rc.guard, static_cast<int>(i)});
      }
      if (!found) fail_at("unknown relation '" + rc.guard + "'", rc.line, rc.col);
      continue;
    }
    VarSet x = to_set(rc.x, rc.line, rc.col);
    VarSet y = to_set(rc.y, rc.line, rc.col) | x;
    if (x == y) fail_at("degree constraint needs x strictly inside y", rc.line, rc.col);
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
      if (q.atoms[i].relation != rc.guard || !y.subset_of(q.atoms[i].varset)) continue;
      found = true;
      if (x.empty() && y == q.atoms[i].varset) has_card[i] = true;
      q.dc.push_back(DegreeConstraint{x, y, bound, rc.guard, static_cast<int>(i)});
      break;
    }
    if (!found) fail_at("no atom of '" + rc.guard + "' covers the constrained variables", rc.line, rc.col);
  }
  std::vector<DegreeConstraint> defaults;
  for (std::size_t i = 0; i < q.atoms.size(); ++i)
    if (!has_card[i])
      defaults.push_back(DegreeConstraint{VarSet(), q.atoms[i].varset, SymbolicBound::base("N"),
                                           q.atoms[i].relation, static_cast<int>(i)});
  q.dc.insert(q.dc.begin(), defaults.begin(), defaults.end());
  if (!has_access_card && !q.access.empty())
    q.ac.insert(q.ac.begin(), DegreeConstraint{VarSet(), q.access, SymbolicBound::base("Q"), "Q", -1});

  for (std::size_t k = 0; k < pmtds_.size(); ++k) {
    std::vector<PmtdSpecNode> nodes;
    for (const auto& rn : pmtds_[k])
      nodes.push_back({to_set(rn.bag, pmtd_pos_[k].first, pmtd_pos_[k].second), rn.materialized, rn.parent});
    q.pmtd_specs.push_back(std::move(nodes));
  }
  return q;
}

std::string join_names(const Cqap& q, VarSet s) {
  std::string out;
  for (int v : s.members()) {
    if (!out.empty()) out += ",";
    out += q.var_names[v];
  }
  return out;
}

}  // namespace

int Cqap::var_index(const std::string& name) const {
  auto it = std::find(var_names.begin(), var_names.end(), name);
  return it == var_names.end() ? -1 : static_cast<int>(it - var_names.begin());
}

std::string Cqap::set_label(VarSet s) const {
  bool compact = true;
  for (const auto& v : var_names)
    if (v.size() != 2 || v[0] != 'x' || !std::isdigit(static_cast<unsigned char>(v[1]))) compact = false;
  std::string out;
  for (int v : s.members()) {
    if (compact) {
      out += var_names[v][1];
    } else {
      if (!out.empty()) out += ",";
      out += var_names[v];
    }
  }
  return out;
}

std::vector<std::string> Cqap::set_names(VarSet s) const {
  std::vector<std::string> out;
  for (int v : s.members()) out.push_back(var_names[v]);
  return out;
}

const DegreeConstraint& Cqap::access_cardinality() const {
  for (const auto& c : ac)
    if (c.x.empty() && c.y == access) return c;
  throw InvalidArgument("query has no access cardinality constraint");
}

Cqap parse_query(const std::string& text) { return Parser(text).run(); }

Cqap load_query(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open query file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_query(ss.str());
}

std::string print_query(const Cqap& q) {
  std::ostringstream out;
  out << q.name << "(" << join_names(q, q.head) << " | " << join_names(q, q.access) << ") :- ";
  for (std::size_t i = 0; i < q.atoms.size(); ++i) {
    if (i) out << ", ";
    out << q.atoms[i].relation << "(";
    for (std::size_t j = 0; j < q.atoms[i].vars.size(); ++j) {
      if (j) out << ",";
      out << q.var_names[q.atoms[i].vars[j]];
    }
    out << ")";
  }
  out << ".\n";
  for (const auto& c : q.dc)
    out << "dc " << c.guard << ": (" << join_names(q, c.x) << " -> " << join_names(q, c.y) << ") <= "
        << c.bound.to_string() << "\n";
  for (const auto& c : q.ac)
    out << "ac (" << join_names(q, c.x) << " -> " << join_names(q, c.y) << ") <= " << c.bound.to_string() << "\n";
  for (const auto& spec : q.pmtd_specs) {
    std::vector<std::vector<int>> children(spec.size());
    int root = -1;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (spec[i].parent < 0)
        root = static_cast<int>(i);
      else
        children[spec[i].parent].push_back(static_cast<int>(i));
    }
    std::function<void(int)> emit = [&](int t) {
      out << "{" << join_names(q, spec[t].bag) << "}";
      if (spec[t].materialized) out << "*";
      if (!children[t].empty()) {
        out << " (";
        for (std::size_t k = 0; k < children[t].size(); ++k) {
          if (k) out << ", ";
          emit(children[t][k]);
        }
        out << ")";
      }
    };
    out << "pmtd ";
    if (root >= 0) emit(root);
    out << "\n";
  }
  return out.str();
}

std::vector<DegreeConstraint> best_constraints(const std::vector<DegreeConstraint>& dc,
                                               const BoundAssignment& assignment) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> best;
  std::vector<DegreeConstraint> out;
  for (const auto& c : dc) {
    auto key = std::make_pair(c.x.bits(), c.y.bits());
    auto it = best.find(key);
    if (it == best.end()) {
      best[key] = out.size();
      out.push_back(c);
    } else if (c.bound.log_value(assignment) < out[it->second].bound.log_value(assignment)) {
      out[it->second] = c;
    }
  }
  return out;
}

std::vector<SplitConstraint> span_split_constraints(const std::vector<DegreeConstraint>& dc,
                                                    const BoundAssignment& assignment) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, SplitConstraint> best;
  for (const auto& c : dc) {
    if (!c.x.empty()) continue;
    Rational val = c.bound.log_value(assignment);
    for_each_subset(c.y, [&](VarSet y) {
      if (y.size() < 2) return;
      for_each_subset(y, [&](VarSet x) {
        if (x.empty() || x == y) return;
        auto key = std::make_pair(x.bits(), y.bits());
        auto it = best.find(key);
        if (it == best.end() || val < it->second.bound.log_value(assignment))
          best[key] = SplitConstraint{x, y, c.y, c.bound, c.atom};
      });
    });
  }
  std::vector<SplitConstraint> out;
  for (auto& [_, sc] : best) out.push_back(sc);
  std::sort(out.begin(), out.end(), [](const SplitConstraint& a, const SplitConstraint& b) {
    if (a.y != b.y) return varset_less(a.y, b.y);
    return varset_less(a.x, b.x);
  });
  return out;
}

}  // namespace cqap
