#include "cqap/rules.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace cqap;
using namespace cqap::testing;

namespace {

std::set<std::string> labels(const std::vector<TwoPhaseRule>& rules, const Cqap& q) {
  std::set<std::string> out;
  for (const auto& r : rules) out.insert(rule_label(r, q));
  return out;
}

}  // namespace

TEST(GenerateRules, ThreeReachFigureTwo) {
  auto q = corpus_query("reach3");
  const VarSet h{0, 3};
  TreeDecomp d;
  d.bags = {VarSet{0, 2, 3}, VarSet{0, 1, 2}};
  d.parent = {-1, 0};
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2, 3}};
  single.parent = {-1};
  std::vector<Pmtd> fig{make_pmtd(d, {false, false}, h), make_pmtd(d, {false, true}, h), make_pmtd(single, {true}, h)};
  auto rules = generate_rules(fig);
  EXPECT_EQ(labels(rules, q),
            (std::set<std::string>{"T134 ∨ S14", "T134 ∨ S13 ∨ S14", "T123 ∨ T134 ∨ S14", "T123 ∨ S13 ∨ S14"}));
}

TEST(GenerateRules, SingleMaterializedPmtd) {
  auto q = corpus_query("reach2");
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2}};
  single.parent = {-1};
  auto rules = generate_rules({make_pmtd(single, {true}, q.head)});
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_TRUE(rules[0].t_targets.empty());
  ASSERT_EQ(rules[0].s_targets.size(), 1u);
  EXPECT_EQ(rules[0].s_targets[0].schema, (VarSet{0, 2}));
}

TEST(GenerateRules, ThreeReachSixteenRaw) {
  auto q = corpus_query("reach3");
  auto pmtds = query_pmtds(q, 4);
  EXPECT_EQ(generate_rules(pmtds).size(), 16u);
}

TEST(PruneRules, ThreeReachTableOne) {
  auto q = corpus_query("reach3");
  auto rules = prune_rules(generate_rules(query_pmtds(q, 4)));
  EXPECT_EQ(labels(rules, q),
            (std::set<std::string>{"T124 ∨ T134 ∨ S14", "T123 ∨ T124 ∨ S13 ∨ S14", "T134 ∨ T234 ∨ S14 ∨ S24",
                                   "T123 ∨ T234 ∨ S13 ∨ S14 ∨ S24"}));
}

TEST(PruneRules, SubsetRemovesSuperset) {
  auto q = corpus_query("reach3");
  auto t = [](VarSet s) { return RuleTarget{s, {}}; };
  TwoPhaseRule big{{t({0, 2}), t({0, 3})}, {t({0, 2, 3}), t({0, 1, 3})}};
  TwoPhaseRule small{{t({0, 3})}, {t({0, 2, 3}), t({0, 1, 3})}};
  auto out = prune_rules({big, small, small});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].same_targets(small));
}

TEST(Rules, InvariantsOnCorpus) {
  for (const char* name : {"reach2", "reach3", "reach4", "square", "setdisj3", "hierarchical"}) {
    auto q = corpus_query(name);
    auto pmtds = query_pmtds(q, q.n());
    auto raw = generate_rules(pmtds);
    std::size_t product = 1;
    for (const auto& p : pmtds) {
      std::set<VarSet> views(p.nu.begin(), p.nu.end());
      views.erase(VarSet{});
      product *= views.size();
    }
    EXPECT_LE(raw.size(), product) << name;
    for (const auto& r : raw) {
      EXPECT_GT(r.target_count(), 0u);
      for (const auto& t : r.s_targets) EXPECT_FALSE(t.schema.empty());
      for (const auto& t : r.t_targets) EXPECT_FALSE(t.schema.empty());
    }
  }
}

TEST(Rules, FullChoiceCoverage) {
  for (const char* name : {"reach2", "reach3", "square", "setdisj2"}) {
    auto q = corpus_query(name);
    auto pmtds = query_pmtds(q, q.n());
    auto raw = generate_rules(pmtds);
    EXPECT_TRUE(full_choice_coverage(pmtds, raw)) << name;
  }
}

TEST(Rules, ThreeReachChoiceFunctionsEnumerated) {
  auto q = corpus_query("reach3");
  auto pmtds = query_pmtds(q, 4);
  auto rules = prune_rules(generate_rules(pmtds));
  std::vector<std::vector<std::pair<bool, VarSet>>> options;
  for (const auto& r : rules) {
    std::vector<std::pair<bool, VarSet>> o;
    for (const auto& t : r.s_targets) o.emplace_back(true, t.schema);
    for (const auto& t : r.t_targets) o.emplace_back(false, t.schema);
    options.push_back(o);
  }
  std::vector<std::size_t> pick(options.size(), 0);
  std::size_t checked = 0;
  while (true) {
    std::set<std::pair<bool, VarSet>> chosen;
    for (std::size_t i = 0; i < pick.size(); ++i) chosen.insert(options[i][pick[i]]);
    bool covered = false;
    for (const auto& p : pmtds) {
      bool all = true;
      for (int t = 0; t < p.decomp.size(); ++t) all = all && chosen.count({p.m[t], p.nu[t]});
      covered = covered || all;
    }
    EXPECT_TRUE(covered);
    ++checked;
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == options[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  EXPECT_EQ(checked, 3u * 4u * 4u * 5u);
}
