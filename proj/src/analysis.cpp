#include "cqap/analysis.hpp"

#include "cqap/errors.hpp"

#include <fstream>
#include <sstream>

namespace cqap {

namespace {

TermReport with_proofs(TradeoffTerm t) {
  TermReport r;
  if (t.ineq) {
    const auto& q = *t.ineq;
    if (q.theta_norm() > 0) r.proof_s = construct(normalized_s_side(q));
    if (q.lambda_norm() > 0) r.proof_t = construct(normalized_t_side(q));
  }
  r.term = std::move(t);
  return r;
}

bool has_line(const std::vector<TermReport>& ts, const TradeoffTerm& t) {
  for (const auto& x : ts)
    if (x.term.same_line(t)) return true;
  return false;
}

}  // namespace

AnalysisReport analyze_query(const Cqap& q, const AnalyzeOptions& opt) {
  AnalysisReport out;
  out.pmtds = query_pmtds(q, opt.max_bag > 0 ? opt.max_bag : q.n());
  auto rules = prune_rules(generate_rules(out.pmtds));
  auto ctx = LpContext::from_query(q, BoundAssignment::standard(1, Rational(1, 1024)));
  std::vector<std::vector<TradeoffTerm>> lp_terms, cat_terms;
  for (const auto& rule : rules) {
    RuleReport rr;
    rr.rule = rule;
    auto sweep = sweep_rule(ctx, rule);
    rr.s_max = sweep.s_max;
    rr.unbounded = sweep.unbounded;
    for (auto& t : sweep.terms) rr.terms.push_back(with_proofs(t));
    auto bfs = bfs_term();
    if (!has_line(rr.terms, bfs))
      if (auto ineq = certify_term(ctx, rule, bfs)) {
        bfs.ineq = ineq;
        rr.terms.push_back(with_proofs(bfs));
      }
    for (const auto& c : opt.catalog) {
      if (has_line(rr.catalog, c)) continue;
      if (auto ineq = certify_term(ctx, rule, c)) {
        TradeoffTerm t = c;
        t.ineq = ineq;
        rr.catalog.push_back(with_proofs(t));
      }
    }
    std::vector<TradeoffTerm> lt, ct;
    for (const auto& t : rr.terms) lt.push_back(t.term);
    for (const auto& t : rr.catalog) ct.push_back(t.term);
    if (ct.empty()) ct = lt;
    for (const auto& t : rr.terms)
      if (t.term.origin == "bfs" && !has_line(rr.catalog, t.term)) ct.push_back(t.term);
    lp_terms.push_back(std::move(lt));
    cat_terms.push_back(std::move(ct));
    out.rules.push_back(std::move(rr));
  }
  auto unit = BoundAssignment::standard(1, 0);
  out.envelope = envelope(lp_terms, unit);
  if (!opt.catalog.empty()) out.catalog_envelope = envelope(cat_terms, unit);
  return out;
}

std::vector<TradeoffTerm> read_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read catalog " + path);
  std::vector<TradeoffTerm> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_term(line));
  }
  return out;
}

std::string report_text(const AnalysisReport& r, const Cqap& q) {
  std::ostringstream out;
  out << "query " << q.name << "\n";
  out << "pmtds " << r.pmtds.size() << "\n";
  for (const auto& p : r.pmtds) out << "  " << pmtd_label(p, q) << "\n";
  out << "rules " << r.rules.size() << "\n";
  for (const auto& rr : r.rules) {
    out << "rule " << rule_label(rr.rule, q) << "\n";
    if (rr.s_max) out << "  s_max " << to_string(*rr.s_max) << "\n";
    if (rr.unbounded) out << "  unbounded\n";
    for (const auto& t : rr.terms) {
      out << "  " << t.term.origin << " " << t.term.to_string();
      if (t.proof_s) out << "  [S steps " << t.proof_s->steps.size() << "]";
      if (t.proof_t) out << "  [T steps " << t.proof_t->steps.size() << "]";
      out << "\n";
    }
    for (const auto& t : rr.catalog) out << "  catalog " << t.term.to_string() << "\n";
  }
  out << "envelope\n" << r.envelope.to_csv();
  if (r.catalog_envelope) out << "catalog envelope\n" << r.catalog_envelope->to_csv();
  return out.str();
}

nlohmann::json report_json(const AnalysisReport& r, const Cqap& q) {
  const auto& names = q.var_names;
  nlohmann::json j;
  j["query"] = q.name;
  auto pm = nlohmann::json::array();
  for (const auto& p : r.pmtds) pm.push_back({{"label", pmtd_label(p, q)}, {"pmtd", pmtd_to_json(p, q)}});
  j["pmtds"] = pm;
  auto terms_json = [&](const std::vector<TermReport>& ts) {
    auto a = nlohmann::json::array();
    for (const auto& t : ts) {
      auto tj = term_to_json(t.term, names);
      if (t.proof_s) tj["proof_s"] = proof_to_json(*t.proof_s, names);
      if (t.proof_t) tj["proof_t"] = proof_to_json(*t.proof_t, names);
      a.push_back(std::move(tj));
    }
    return a;
  };
  auto rules = nlohmann::json::array();
  for (const auto& rr : r.rules) {
    auto rj = rule_to_json(rr.rule, q);
    rj["label"] = rule_label(rr.rule, q);
    if (rr.s_max) rj["s_max"] = to_string(*rr.s_max);
    rj["unbounded"] = rr.unbounded;
    rj["terms"] = terms_json(rr.terms);
    rj["catalog"] = terms_json(rr.catalog);
    rules.push_back(std::move(rj));
  }
  j["rules"] = rules;
  auto curve = [](const TradeoffCurve& c) {
    auto a = nlohmann::json::array();
    for (const auto& [s, t] : c.points) a.push_back({to_string(s), to_string(t)});
    return a;
  };
  j["envelope"] = curve(r.envelope);
  if (r.catalog_envelope) j["catalog_envelope"] = curve(*r.catalog_envelope);
  return j;
}

}  // namespace cqap
