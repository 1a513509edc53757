#include "cqap/database.hpp"
#include "cqap/errors.hpp"
#include "cqap/join.hpp"
#include "cqap/relation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace cqap;
using namespace cqap::testing;

namespace {

Relation rel(VarSet s, std::vector<Tuple> rows) { return Relation("r", s, std::move(rows)); }

Relation random_relation(std::mt19937_64& rng, VarSet s, int rows, int dom) {
  std::vector<Tuple> out;
  for (int i = 0; i < rows; ++i) {
    Tuple t;
    for (int k = 0; k < s.size(); ++k) t.push_back(rng() % dom);
    out.push_back(t);
  }
  return rel(s, out);
}

}  // namespace

TEST(VarSet, BitOperations) {
  VarSet a{0, 2}, b{2, 3};
  EXPECT_EQ((a | b), (VarSet{0, 2, 3}));
  EXPECT_EQ((a & b), VarSet{2});
  EXPECT_EQ((a - b), VarSet{0});
  EXPECT_TRUE(VarSet().empty());
  EXPECT_TRUE(VarSet{2}.proper_subset_of(a));
  EXPECT_EQ(a.members(), (std::vector<int>{0, 2}));
}

TEST(Relation, DeduplicatesRows) {
  auto r = rel({0, 1}, {{1, 2}, {1, 2}, {0, 5}});
  EXPECT_EQ(r.size(), 2u);
  EXPECT_TRUE(r.contains({0, 5}));
}

TEST(Relation, ArityMismatchThrows) { EXPECT_THROW(rel({0, 1}, {{1}}), InvalidArgument); }

TEST(Project, CollapsesDuplicates) {
  EXPECT_EQ(project(rel({0, 1}, {{1, 2}, {1, 3}}), {0}).rows(), (std::vector<Tuple>{{1}}));
  EXPECT_TRUE(project(rel({0, 1}, {}), {0}).empty());
  EXPECT_EQ(project(rel({0, 1}, {{1, 2}, {2, 2}}), {1}).rows(), (std::vector<Tuple>{{2}}));
}

TEST(Project, OutsideSchemaThrows) { EXPECT_THROW(project(rel({0, 1}, {{1, 2}}), {2}), InvalidArgument); }

TEST(Semijoin, Examples) {
  auto r = rel({0, 1}, {{1, 2}, {3, 4}});
  EXPECT_EQ(semijoin(r, rel({1}, {{2}})).rows(), (std::vector<Tuple>{{1, 2}}));
  EXPECT_EQ(semijoin(r, rel({2}, {{7}})), r);
  EXPECT_TRUE(semijoin(r, rel({1}, {})).empty());
}

TEST(Semijoin, SubsetAndIdempotent) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    auto r = random_relation(rng, {0, 1}, 20, 5);
    auto s = random_relation(rng, {1, 2}, 10, 5);
    auto once = semijoin(r, s);
    for (const auto& t : once.rows()) EXPECT_TRUE(r.contains(t));
    EXPECT_EQ(semijoin(once, s), once);
  }
}

TEST(Degree, Examples) {
  // a = 0, b = 1
  auto d = degree(rel({0, 1}, {{0, 1}, {0, 2}, {1, 1}}), {0}, {0, 1});
  EXPECT_EQ(d.counts.at({0}), 2u);
  EXPECT_EQ(d.counts.at({1}), 1u);
  EXPECT_EQ(d.max, 2u);
  EXPECT_EQ(d.counts.count({7}), 0u);
  auto e = degree(rel({0, 1}, {{0, 1}, {1, 1}, {2, 3}}), {0}, {0, 1});
  for (const auto& [k, c] : e.counts) EXPECT_EQ(c, 1u);
}

TEST(Degree, SumsToProjection) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto r = random_relation(rng, {0, 1, 2}, 30, 4);
    auto d = degree(r, {0}, {0, 1});
    std::uint64_t sum = 0;
    for (const auto& [k, c] : d.counts) sum += c;
    EXPECT_EQ(sum, project(r, {0, 1}).size());
  }
}

TEST(Degree, BadPairThrows) { EXPECT_THROW(degree(rel({0, 1}, {}), {0, 1}, {0}), InvalidArgument); }

TEST(Oracle, ThreeReachPath) {
  auto q = corpus_query("reach3");
  auto db = make_db(q, {{"R12", {{1, 2}}}, {"R23", {{2, 3}}}, {"R34", {{3, 4}}}});
  auto req = request_of(q, db, {{1, 4}});
  auto a = oracle_answer(db, q, req);
  EXPECT_EQ(rows_of(a), brute_force(db, q, req));
  EXPECT_EQ(a.size(), 1u);
  EXPECT_TRUE(oracle_answer(db, q, Relation("Q", q.access)).empty());
}

TEST(Oracle, SetDisjointnessHead) {
  auto q = parse_query("sd(x1,x2,y | x1,x2) :- R(y,x1), R(y,x2).\ndc R: size = N\nac |Q| <= Q\n");
  auto db = make_db(q, {{"R", {{9, 1}, {9, 2}}}});
  auto req = request_of(q, db, {{1, 2}});
  auto a = oracle_answer(db, q, req);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.schema(), q.all_vars());
}

TEST(Oracle, MatchesBruteForceAndIsMonotone) {
  std::mt19937_64 rng(11);
  for (const char* name : {"reach2", "reach3", "square", "setdisj2", "hierarchical"}) {
    auto q = corpus_query(name);
    for (int trial = 0; trial < 20; ++trial) {
      std::map<std::string, std::vector<std::vector<int>>> data;
      for (const auto& a : q.atoms)
        for (int i = 0; i < 12; ++i) {
          std::vector<int> row;
          for (std::size_t k = 0; k < a.vars.size(); ++k) row.push_back(rng() % 4);
          data[a.relation].push_back(row);
        }
      auto db = make_db(q, data);
      std::vector<std::vector<int>> small, big;
      for (int i = 0; i < 6; ++i) {
        std::vector<int> row;
        for (int k = 0; k < q.access.size(); ++k) row.push_back(rng() % 4);
        (i < 3 ? small : big).push_back(row);
      }
      big.insert(big.end(), small.begin(), small.end());
      auto r1 = request_of(q, db, small), r2 = request_of(q, db, big);
      auto a1 = oracle_answer(db, q, r1), a2 = oracle_answer(db, q, r2);
      EXPECT_EQ(rows_of(a1), brute_force(db, q, r1)) << name;
      EXPECT_EQ(rows_of(a2), brute_force(db, q, r2)) << name;
      for (const auto& t : a1.rows()) EXPECT_TRUE(a2.contains(t));
    }
  }
}

TEST(GenericJoin, AgreesWithFoldJoin) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    auto a = random_relation(rng, {0, 1}, 15, 4);
    auto b = random_relation(rng, {1, 2}, 15, 4);
    auto c = random_relation(rng, {0, 2}, 15, 4);
    for (VarSet out : {VarSet{0, 1, 2}, VarSet{0, 2}, VarSet{1}, VarSet{}})
      EXPECT_EQ(generic_join({a, b, c}, out), fold_join({a, b, c}, out));
  }
}

TEST(Database, ConstraintsAreChecked) {
  auto q = parse_query("p(x1,x2 | x1) :- R(x1,x2).\ndc R: (x1 -> x1,x2) <= 1\nac |Q| <= 1\n");
  auto db = make_db(q, {{"R", {{1, 2}, {1, 3}}}});
  EXPECT_FALSE(check_constraints(db, q, measured_assignment(db, 1)).empty());
  auto ok = make_db(q, {{"R", {{1, 2}, {2, 3}}}});
  EXPECT_TRUE(check_constraints(ok, q, measured_assignment(ok, 1)).empty());
}

TEST(Database, TsvRoundTrip) {
  auto q = corpus_query("reach2");
  auto db = make_db(q, {{"R12", {{1, 2}, {3, 4}}}, {"R23", {{2, 5}}}});
  auto dir = std::filesystem::temp_directory_path() / "cqap_db_roundtrip";
  std::filesystem::remove_all(dir);
  save_database(db, dir.string());
  auto back = load_database(dir.string());
  EXPECT_EQ(back.size(), db.size());
  auto req = request_of(q, db, {{1, 5}});
  EXPECT_EQ(format_relation(oracle_answer(db, q, req), q, db.dict),
            format_relation(oracle_answer(back, q, parse_requests("#schema x1 x3\n1\t5\n", q, back.dict)), q,
                            back.dict));
  std::filesystem::remove_all(dir);
}
