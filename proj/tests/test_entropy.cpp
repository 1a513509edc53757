#include "cqap/entropy.hpp"
#include "cqap/errors.hpp"
#include "cqap/rules.hpp"
#include "cqap/simplex.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cqap;
using namespace cqap::testing;

namespace {

std::vector<TwoPhaseRule> rules_of(const Cqap& q) { return prune_rules(generate_rules(query_pmtds(q, q.n()))); }

TwoPhaseRule rule_labeled(const Cqap& q, const std::string& label) {
  for (const auto& r : rules_of(q))
    if (rule_label(r, q) == label) return r;
  throw std::runtime_error("no rule " + label);
}

// Test-side envelope: max over rules of min over lines, evaluated pointwise.
Rational envelope_at(const std::vector<std::vector<TradeoffTerm>>& rules, const Rational& s) {
  Rational worst = 0;
  for (const auto& terms : rules) {
    Rational best;
    bool first = true;
    for (const auto& t : terms) {
      Rational v = (t.rhs.exponent("N") - t.space_exp * s) / t.time_exp;
      if (first || v < best) best = v;
      first = false;
    }
    if (best < 0) best = 0;
    if (best > worst) worst = best;
  }
  return worst;
}

TradeoffTerm term(const std::string& s) { return parse_term(s); }

Rational q(const char* s) { return parse_rational(s); }

Rational frac(long a, long b) {
  Rational r(a, b);
  r.canonicalize();
  return r;
}

}  // namespace

TEST(Polymatroid, Examples) {
  EXPECT_TRUE(check_polymatroid(SetFunction::modular({1, 1, 1})));
  auto bits = SetFunction::zero(2);
  bits[VarSet{0}] = 1;
  bits[VarSet{1}] = 1;
  bits[VarSet{0, 1}] = 2;
  EXPECT_TRUE(check_polymatroid(bits));
  auto bad = SetFunction::zero(2);
  bad[VarSet{0}] = 2;
  bad[VarSet{1}] = 1;
  bad[VarSet{0, 1}] = 1;
  EXPECT_FALSE(check_polymatroid(bad));
}

TEST(Polymatroid, SamplersProducePolymatroids) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    EXPECT_TRUE(check_polymatroid(random_polymatroid(4, rng)));
    EXPECT_TRUE(check_polymatroid(random_entropic(4, rng)));
  }
}

TEST(Simplex, CertificatesAndMethodsAgree) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 150; ++trial) {
    LinearProgram lp;
    lp.num_vars = 4;
    for (int j = 0; j < 4; ++j) lp.objective.push_back(static_cast<int>(rng() % 7) - 2);
    for (int i = 0; i < 5; ++i) {
      std::vector<std::pair<int, Rational>> row;
      for (int j = 0; j < 4; ++j) row.emplace_back(j, frac(static_cast<long>(rng() % 5), static_cast<long>(1 + rng() % 3)));
      lp.add_row(row, Rational(1 + static_cast<int>(rng() % 9)));
    }
    auto exact = solve_lp(lp, LpMethod::Exact);
    auto hybrid = solve_lp(lp, LpMethod::Hybrid);
    ASSERT_EQ(exact.status, hybrid.status);
    if (exact.status == LpStatus::Optimal) {
      EXPECT_EQ(exact.value, hybrid.value);
      EXPECT_TRUE(check_lp_certificate(lp, exact));
      EXPECT_TRUE(check_lp_certificate(lp, hybrid));
    }
  }
}

TEST(Simplex, UnboundedAndInfeasible) {
  LinearProgram lp;
  lp.num_vars = 1;
  lp.objective = {1};
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Unbounded);
  lp.add_row({{0, 1}}, -1);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Infeasible);
}

TEST(JointLp, TwoReachAtLinearSpace) {
  auto qr = corpus_query("reach2");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  auto sol = solve_joint_lp(ctx, rules_of(qr).at(0), 1);
  ASSERT_EQ(sol.status, ObjStatus::Finite);
  EXPECT_EQ(sol.obj, q("1/2"));
}

TEST(JointLp, MaterializeAllAboveSMax) {
  auto qr = corpus_query("reach2");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  EXPECT_EQ(solve_joint_lp(ctx, rules_of(qr).at(0), 2).status, ObjStatus::MaterializeAll);
  auto r4 = rule_labeled(corpus_query("reach3"), "T123 ∨ T234 ∨ S13 ∨ S14 ∨ S24");
  auto c3 = LpContext::from_query(corpus_query("reach3"), BoundAssignment::standard(1, 0));
  EXPECT_EQ(solve_joint_lp(c3, r4, q("3/2")).status, ObjStatus::MaterializeAll);
  auto mid = solve_joint_lp(c3, r4, q("5/4"));
  ASSERT_EQ(mid.status, ObjStatus::Finite);
  EXPECT_EQ(mid.obj, envelope_at({{term("S*T ~= N^2*Q"), term("S^4*T ~= N^6*Q"), term("T ~= N*Q")}}, q("5/4")));
}

TEST(JointLp, ObjNonIncreasingAndSandwiched) {
  auto qr = corpus_query("reach3");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  std::mt19937_64 rng(23);
  for (const auto& rule : rules_of(qr)) {
    Rational prev = 100;
    for (int k = 0; k <= 12; ++k) {
      Rational s = frac(k, 8);
      auto sol = solve_joint_lp(ctx, rule, s);
      if (sol.status != ObjStatus::Finite) break;
      EXPECT_LE(sol.obj, prev);
      prev = sol.obj;
      for (int trial = 0; trial < 3; ++trial) {
        std::map<VarSet, Rational> lambda, theta;
        Rational total = 0;
        std::vector<Rational> w;
        for (std::size_t i = 0; i < rule.t_targets.size(); ++i) {
          w.emplace_back(1 + static_cast<int>(rng() % 4));
          total += w.back();
        }
        for (std::size_t i = 0; i < rule.t_targets.size(); ++i) lambda[rule.t_targets[i].schema] += w[i] / total;
        for (const auto& t : rule.s_targets) theta[t.schema] += frac(static_cast<long>(rng() % 3), 2);
        EXPECT_GE(weighted_lp_value(ctx, rule, lambda, theta, s), sol.obj);
      }
    }
  }
}

TEST(JointInequality, TwoReachMatchesDisplayedForm) {
  auto qr = corpus_query("reach2");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  auto ineq = certify_term(ctx, rules_of(qr).at(0), term("S*T^2 ~= N^2*Q^2"));
  ASSERT_TRUE(ineq);
  // hS(1) + hT(2|1) + hS(3) + hT(2|3) + 2hT(13) >= hS(13) + 2hT(123), halved.
  ConditionalVector gs, gt;
  gs.add({}, VarSet{0}, q("1/2"));
  gs.add({}, VarSet{2}, q("1/2"));
  gt.add(VarSet{0}, VarSet{0, 1}, q("1/2"));
  gt.add(VarSet{2}, VarSet{1, 2}, q("1/2"));
  gt.add({}, VarSet{0, 2}, 1);
  EXPECT_EQ(ineq->g_s(), gs);
  EXPECT_EQ(ineq->g_t(), gt);
  EXPECT_EQ(ineq->theta_norm(), q("1/2"));
  EXPECT_EQ(ineq->lambda_norm(), 1);
  EXPECT_TRUE(check_joint_witness(*ineq));
}

TEST(JointInequality, PureOnlineHasNoSSide) {
  auto qr = corpus_query("reach2");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  auto sol = solve_joint_lp(ctx, rules_of(qr).at(0), 0);
  ASSERT_EQ(sol.status, ObjStatus::Finite);
  if (sol.ineq.theta_norm() == 0) EXPECT_TRUE(sol.ineq.g_s().empty());
}

TEST(JointInequality, VerifyRejectsInflatedRhs) {
  auto qr = corpus_query("reach2");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, 0));
  auto ineq = *certify_term(ctx, rules_of(qr).at(0), term("S*T^2 ~= N^2*Q^2"));
  EXPECT_TRUE(verify_joint_inequality(ineq, 1000).ok);
  auto bad = ineq;
  bad.lambda = ineq.lambda.scaled(2);
  bad.theta = ineq.theta.scaled(2);
  auto rep = verify_joint_inequality(bad, 1000);
  EXPECT_FALSE(rep.ok);
  EXPECT_FALSE(rep.counterexample.empty());
  JointInequality empty;
  empty.n = 3;
  EXPECT_TRUE(verify_joint_inequality(empty, 100).ok);
}

TEST(Sweep, GoldenTerms) {
  struct Case {
    const char* query;
    const char* term;
  };
  const Case cases[] = {{"reach2", "S*T^2 ~= N^2*Q^2"},     {"square", "S*T^2 ~= N^2*Q^2"},
                        {"setdisj2_bool", "S*T^2 ~= N^2*Q^2"}, {"setdisj3", "S*T^2 ~= N^3*Q^2"},
                        {"setdisj4", "S*T^3 ~= N^4*Q^3"},      {"reach4_path", "S^3*T^2 ~= N^6*Q^2"}};
  for (const auto& c : cases) {
    auto qr = corpus_query(c.query);
    auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, q("1/1024")));
    bool found = false;
    for (const auto& rule : rules_of(qr))
      for (const auto& t : sweep_rule(ctx, rule).terms) found = found || t.same_line(term(c.term));
    EXPECT_TRUE(found) << c.query << " " << c.term;
  }
}

TEST(Sweep, TermsAreSoundOnCorpus) {
  for (const char* name : {"reach2", "reach3", "square", "setdisj3"}) {
    auto qr = corpus_query(name);
    auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, q("1/1024")));
    for (const auto& rule : rules_of(qr))
      for (const auto& t : sweep_rule(ctx, rule).terms) {
        ASSERT_TRUE(t.ineq);
        EXPECT_TRUE(check_joint_witness(*t.ineq)) << name;
        EXPECT_TRUE(verify_joint_inequality(*t.ineq, 200).ok) << name << " " << t.to_string();
      }
  }
}

TEST(EdgeCover, SetDisjointness) {
  for (int k : {2, 3, 4}) {
    auto qr = corpus_query("setdisj" + std::to_string(k));
    std::vector<Rational> u(qr.atoms.size(), 1);
    auto c = tradeoff_from_edge_cover(qr, u);
    EXPECT_EQ(c.alpha, k);
    EXPECT_TRUE(c.term.same_line(term("S*T^" + std::to_string(k) + " ~= N^" + std::to_string(k) + "*Q^" +
                                      std::to_string(k))));
    ASSERT_TRUE(c.term.ineq);
    EXPECT_TRUE(verify_joint_inequality(*c.term.ineq, 300).ok);
  }
}

TEST(EdgeCover, NotACoverThrows) {
  auto qr = corpus_query("reach2");
  EXPECT_THROW(tradeoff_from_edge_cover(qr, {1, 0}), InvalidArgument);
}

TEST(EdgeCover, SlackAtLeastOne) {
  std::mt19937_64 rng(29);
  for (const char* name : {"reach2", "reach3", "square", "setdisj3"}) {
    auto qr = corpus_query(name);
    for (int t = 0; t < 20; ++t) {
      std::vector<Rational> u;
      for (std::size_t i = 0; i < qr.atoms.size(); ++i) u.push_back(frac(1 + static_cast<long>(rng() % 3), 2));
      try {
        EXPECT_GE(tradeoff_from_edge_cover(qr, u).alpha, 1);
      } catch (const InvalidArgument&) {
      }
    }
  }
}

TEST(EdgeCover, FullAccessIsDegenerate) {
  auto qr = parse_query("p(x1,x2 | x1,x2) :- R(x1,x2).\ndc R: size = N\n");
  EXPECT_TRUE(tradeoff_from_edge_cover(qr, {1}).degenerate);
}

TEST(PathTradeoff, FourReachExample) {
  auto qr = corpus_query("reach4_path");
  TreeDecomp d;
  d.bags = {VarSet{0, 1, 3, 4}, VarSet{1, 2, 3}};
  d.parent = {-1, 0};
  // Atoms R12, R23, R34, R45.
  std::vector<std::vector<Rational>> covers{{1, 0, 0, 1}, {0, 1, 1, 0}};
  auto p = tradeoff_from_path(qr, d, covers, {0, 1});
  EXPECT_TRUE(p.term.same_line(term("S^3*T^2 ~= N^6*Q^2")));
  auto single = tradeoff_from_path(qr, d, covers, {0});
  EXPECT_EQ(single.alphas.size(), 1u);
  EXPECT_THROW(tradeoff_from_path(qr, d, covers, {1}), InvalidArgument);
}

TEST(Envelope, ThreeReachTableOne) {
  std::vector<std::vector<TradeoffTerm>> rules{
      {term("S*T^2 ~= N^2*Q^2"), term("T ~= N*Q")},
      {term("S^2*T^3 ~= N^4*Q^3"), term("T ~= N*Q")},
      {term("S^2*T^3 ~= N^4*Q^3"), term("T ~= N*Q")},
      {term("S*T ~= N^2*Q"), term("S^4*T ~= N^6*Q"), term("T ~= N*Q")}};
  auto curve = envelope(rules, BoundAssignment::standard(1, 0));
  for (auto [s, t] : {std::pair{q("7/5"), q("2/5")}, {q("4/3"), q("2/3")}, {q("1"), q("1")}}) {
    EXPECT_EQ(envelope_at(rules, s), t);
    EXPECT_EQ(curve.at(s), t);
  }
  for (int k = 0; k <= 40; ++k) EXPECT_EQ(curve.at(frac(k, 20)), envelope_at(rules, frac(k, 20)));
}

TEST(Envelope, FourReachPublishedTerms) {
  std::vector<std::vector<TradeoffTerm>> rules{
      {term("S*T ~= N^2*Q"), term("T ~= N*Q")},
      {term("S^2*T^2 ~= N^4*Q^2"), term("T ~= N*Q")},
      {term("S^6*T^5 ~= N^12*Q^5"), term("S^8*T^3 ~= N^13*Q^3"), term("T ~= N*Q")}};
  auto curve = envelope(rules, BoundAssignment::standard(1, 0));
  std::set<std::pair<Rational, Rational>> points(curve.points.begin(), curve.points.end());
  for (auto p : {std::pair{q("7/5"), q("3/5")}, {q("29/22"), q("9/11")}, {q("7/6"), q("1")}}) {
    EXPECT_EQ(envelope_at(rules, p.first), p.second);
    EXPECT_TRUE(points.count(p)) << to_string(p.first);
  }
}

TEST(Envelope, SingleLine) {
  auto curve = envelope({{term("S*T ~= N^2")}}, BoundAssignment::standard(1, 0));
  EXPECT_EQ(curve.at(0), 2);
  EXPECT_EQ(curve.at(1), 1);
  EXPECT_EQ(curve.at(3), 0);
}

TEST(Envelope, NonIncreasing) {
  auto qr = corpus_query("reach3");
  auto ctx = LpContext::from_query(qr, BoundAssignment::standard(1, q("1/1024")));
  std::vector<std::vector<TradeoffTerm>> all;
  for (const auto& rule : rules_of(qr)) {
    auto terms = sweep_rule(ctx, rule).terms;
    terms.push_back(bfs_term());
    all.push_back(terms);
  }
  auto curve = envelope(all, BoundAssignment::standard(1, 0));
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    EXPECT_GT(curve.points[i].first, curve.points[i - 1].first);
    EXPECT_LE(curve.points[i].second, curve.points[i - 1].second);
  }
}

TEST(Terms, ParseAndPrint) {
  auto t = term("S^6*T^5 ~= N^12*Q^5");
  EXPECT_EQ(t.space_exp, 6);
  EXPECT_EQ(t.time_exp, 5);
  EXPECT_EQ(t.to_string(), "S^6*T^5 ~= N^12*Q^5");
  EXPECT_TRUE(term("S^3*T^2 ~= N^6*Q^2").same_line(term("S^1.5*T ~= N^3*Q")));
  EXPECT_THROW(term("S*T = N"), InvalidArgument);
}
