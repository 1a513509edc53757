#include "cqap/decomposition.hpp"
#include "cqap/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace cqap;
using namespace cqap::testing;

namespace {

// Variables x1..x4 are indices 0..3.
TreeDecomp two_bags(VarSet root, VarSet child) {
  TreeDecomp d;
  d.bags = {root, child};
  d.parent = {-1, 0};
  d.root = 0;
  return d;
}

const VarSet k134{0, 2, 3};
const VarSet k123{0, 1, 2};
const VarSet k14{0, 3};

}  // namespace

TEST(FreeConnex, Examples) {
  auto d = two_bags(k134, k123);
  EXPECT_TRUE(is_free_connex(d, k14));
  EXPECT_FALSE(is_free_connex(d, VarSet{0, 1}));
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2, 3}};
  single.parent = {-1};
  EXPECT_TRUE(is_free_connex(single, VarSet{1}));
  EXPECT_TRUE(is_free_connex(single, VarSet{}));
}

TEST(ComputeNu, Examples) {
  auto d = two_bags(k134, k123);
  auto nu = compute_nu(d, {false, true}, k14);
  EXPECT_EQ(nu[1], (VarSet{0, 2}));
  EXPECT_EQ(nu[0], k134);
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2, 3}};
  single.parent = {-1};
  EXPECT_EQ(compute_nu(single, {true}, k14)[0], k14);
  // Parent and child materialized, child adds no head variable.
  EXPECT_TRUE(compute_nu(d, {true, true}, k14)[1].empty());
}

TEST(ComputeNu, NotDownwardClosedThrows) {
  auto d = two_bags(k134, k123);
  EXPECT_THROW(compute_nu(d, {true, false}, k14), InvalidArgument);
}

TEST(Redundancy, Examples) {
  auto d = two_bags(k134, k123);
  EXPECT_TRUE(check_redundancy(make_pmtd(d, {true, true}, k14)));
  EXPECT_FALSE(check_redundancy(make_pmtd(d, {false, true}, k14)));
  EXPECT_FALSE(check_redundancy(make_pmtd(d, {false, false}, k14)));
}

TEST(Domination, Examples) {
  auto d = two_bags(k134, k123);
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2, 3}};
  single.parent = {-1};
  auto left = make_pmtd(d, {false, false}, k14);
  auto middle = make_pmtd(d, {false, true}, k14);
  auto right = make_pmtd(single, {true}, k14);
  auto big = make_pmtd(single, {false}, k14);
  EXPECT_TRUE(check_domination(left, big));
  const std::vector<Pmtd> three{left, middle, right};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) EXPECT_FALSE(check_domination(three[i], three[j])) << i << " " << j;
}

TEST(InducedPmtds, ChainAndSingle) {
  // 4-reachability: x1..x5 are 0..4.
  auto d = two_bags(VarSet{0, 1, 3, 4}, VarSet{1, 2, 3});
  EXPECT_EQ(induced_pmtds(d, VarSet{0, 4}, VarSet{0, 4}).size(), 3u);
  TreeDecomp single;
  single.bags = {VarSet{0, 1, 2}};
  single.parent = {-1};
  EXPECT_EQ(induced_pmtds(single, VarSet{0, 2}, VarSet{0, 2}).size(), 2u);
}

TEST(PmtdSet, ThreeReachHasFive) {
  auto q = corpus_query("reach3");
  auto set = enumerate_pmtd_set(q, 4);
  EXPECT_EQ(set.size(), 5u);
  std::set<std::string> labels;
  for (const auto& p : set) labels.insert(pmtd_label(p, q));
  EXPECT_EQ(labels.size(), 5u);
}

TEST(PmtdSet, TwoReach) {
  auto q = corpus_query("reach2");
  auto set = enumerate_pmtd_set(q, 3);
  ASSERT_EQ(set.size(), 2u);
  std::set<std::string> labels;
  for (const auto& p : set) labels.insert(pmtd_label(p, q));
  EXPECT_TRUE(labels.count("(T123)"));
  EXPECT_TRUE(labels.count("(S13)"));
}

TEST(PmtdSet, SingleAtom) {
  auto q = parse_query("p(x1 | x1) :- R(x1,x2).\ndc R: size = N\n");
  EXPECT_EQ(enumerate_pmtd_set(q, 2).size(), 2u);
}

TEST(PmtdSet, EveryPmtdPassesChecks) {
  for (const char* name : {"reach2", "reach3", "reach4", "square", "setdisj3", "hierarchical", "reach4_path"}) {
    auto q = corpus_query(name);
    auto set = query_pmtds(q, q.n());
    auto edges = access_edges(q);
    for (const auto& p : set) {
      EXPECT_TRUE(is_tree_decomposition(p.decomp, edges)) << name;
      EXPECT_TRUE(is_valid_pmtd(p, q.head, q.access)) << name;
      EXPECT_FALSE(check_redundancy(p)) << name;
    }
    for (std::size_t i = 0; i < set.size(); ++i)
      for (std::size_t j = 0; j < set.size(); ++j)
        if (i != j) EXPECT_FALSE(check_domination(set[i], set[j])) << name;
  }
}

TEST(PmtdSet, JsonRoundTrip) {
  auto q = corpus_query("reach3");
  for (const auto& p : enumerate_pmtd_set(q, 4)) {
    auto back = pmtd_from_json(pmtd_to_json(p, q), q);
    EXPECT_EQ(pmtd_key(back), pmtd_key(p));
  }
}
