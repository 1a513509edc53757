#include "cqap/errors.hpp"
#include "cqap/query.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace cqap;
using namespace cqap::testing;

TEST(ParseQuery, ThreeReach) {
  auto q = parse_query("phi(x1,x4 | x1,x4) :- R1(x1,x2), R2(x2,x3), R3(x3,x4).");
  EXPECT_EQ(q.n(), 4);
  EXPECT_EQ(q.atoms.size(), 3u);
  EXPECT_EQ(q.head, q.access);
  EXPECT_EQ(q.access.size(), 2);
}

TEST(ParseQuery, HeadNormalizedToContainAccess) {
  auto q = parse_query("phi(y | x1,x2) :- R(y,x1), R(y,x2).");
  EXPECT_EQ(q.head, q.all_vars());
  EXPECT_EQ(q.atoms[0].relation, q.atoms[1].relation);
  auto b = parse_query("phi( | x1,x3) :- R(x1,x2), S(x2,x3).");
  EXPECT_EQ(b.head, b.access);
  EXPECT_EQ(b.head.size(), 2);
}

TEST(ParseQuery, AccessCardinalityAlwaysPresent) {
  auto q = parse_query("phi(x1 | x1) :- R(x1,x2).");
  EXPECT_EQ(q.access_cardinality().y, q.access);
  EXPECT_TRUE(q.access_cardinality().x.empty());
}

TEST(ParseQuery, Errors) {
  EXPECT_THROW(parse_query("phi(x1 | z) :- R(x1,x2)."), ParseError);
  EXPECT_THROW(parse_query("phi(x1 | x1) :- R(x1,x2"), ParseError);
  EXPECT_THROW(parse_query("phi(w | x1) :- R(x1,x2)."), ParseError);
  try {
    parse_query("phi(x1 | x1) :- R(x1,,x2).");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_GT(e.column(), 1);
  }
}

TEST(ParseQuery, DegreeConstraints) {
  auto q = parse_query("p(x1,x2 | x1) :- R(x1,x2).\ndc R: (x1 -> x1,x2) <= 100\ndc R: size = N^1\nac |Q| <= 1\n");
  int degree = 0;
  for (const auto& d : q.dc)
    if (!d.is_cardinality()) {
      ++degree;
      EXPECT_EQ(d.x.size(), 1);
      EXPECT_EQ(d.y.size(), 2);
    }
  EXPECT_EQ(degree, 1);
}

TEST(ParseQuery, PrintParseRoundTrip) {
  for (const auto& e : std::filesystem::directory_iterator(corpus("queries"))) {
    auto q = load_query(e.path().string());
    auto text = print_query(q);
    auto back = parse_query(text);
    EXPECT_EQ(print_query(back), text) << e.path();
    EXPECT_EQ(back.head, q.head);
    EXPECT_EQ(back.access, q.access);
  }
}

TEST(SplitConstraints, BinaryRelation) {
  auto q = parse_query("p(x1,x2 | x1) :- R(x1,x2).\ndc R: size = N\n");
  auto sc = span_split_constraints(q.dc, BoundAssignment::standard());
  ASSERT_EQ(sc.size(), 2u);
  for (const auto& s : sc) {
    EXPECT_EQ(s.x.size(), 1);
    EXPECT_EQ(s.y, (VarSet{0, 1}));
  }
}

TEST(SplitConstraints, UnaryRelationHasNone) {
  auto q = parse_query("p(x1 | x1) :- R(x1).\ndc R: size = N\n");
  EXPECT_TRUE(span_split_constraints(q.dc, BoundAssignment::standard()).empty());
}

TEST(SplitConstraints, TernaryMatchesEnumeration) {
  auto q = parse_query("p(a | a) :- R(a,b,c).\ndc R: size = N\n");
  auto sc = span_split_constraints(q.dc, BoundAssignment::standard());
  // Independent count of nonempty X strictly inside Y inside {a,b,c}.
  int expect = 0;
  for (unsigned y = 1; y < 8; ++y)
    for (unsigned x = 1; x < 8; ++x)
      if ((x & y) == x && x != y) ++expect;
  EXPECT_EQ(static_cast<int>(sc.size()), expect);
  EXPECT_EQ(expect, 12);
}
