#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "lincqa/error.hpp"
#include "lincqa/query.hpp"
#include "lincqa/workbench.hpp"
#include "support.hpp"

using namespace lincqa;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kSyntaxError;
}

Schema rs_schema() { return parse_schema("R(a*, b)\nS(a*, b)\nT(a*, b)\n"); }

}  // namespace

TEST(Schema, ParsesKeysAndComments) {
  Schema s = parse_schema("# company\nR8(a1*, a2*, a3)\nT(x*)\n");
  ASSERT_EQ(s.relations().size(), 2u);
  EXPECT_EQ(s.at("R8").key_positions, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(s.at("T").arity(), 1u);
  EXPECT_EQ(parse_schema(print_schema(s)), s);
}

TEST(Schema, RejectsBadDeclarations) {
  EXPECT_EQ(code_of([] { parse_schema("R(a, b)"); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([] { parse_schema("R(a*, a)"); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([] { parse_schema("R(a*)\nR(b*)"); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([] { parse_schema("R(a*"); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([] { load_schema("/nonexistent/schema.txt"); }), ErrorCode::kMissingFile);
}

TEST(ParseQuery, CompanyBooleanQuery) {
  ConjunctiveQuery q =
      parse_query("q() :- Employee(x,y,z), Manager(y,x,'2020'), Contact(y,x).", company_schema());
  EXPECT_TRUE(q.is_boolean());
  EXPECT_TRUE(q.is_self_join_free());
  EXPECT_TRUE(q.is_connected());
  ASSERT_EQ(q.body.size(), 3u);
  EXPECT_EQ(q.body[1].terms[2], Term::constant("2020"));
  EXPECT_EQ(q.body[0].key_vars(), (std::vector<std::string>{"x"}));
}

TEST(ParseQuery, HeadAndFullness) {
  ConjunctiveQuery q = parse_query("q(x) :- R(x,y).", rs_schema());
  EXPECT_EQ(q.head, (std::vector<std::string>{"x"}));
  EXPECT_FALSE(q.is_full());
  EXPECT_TRUE(parse_query("q(x, y) :- R(x,y).", rs_schema()).is_full());
}

TEST(ParseQuery, DisconnectedBody) {
  EXPECT_FALSE(parse_query("q() :- R(x,y), S(u,v).", rs_schema()).is_connected());
}

TEST(ParseQuery, BareIntegersAreConstants) {
  ConjunctiveQuery q = parse_query("q() :- R(x, 3).", rs_schema());
  EXPECT_EQ(q.body[0].terms[1], Term::constant("3"));
}

TEST(ParseQuery, Errors) {
  Schema s = rs_schema();
  EXPECT_EQ(code_of([&] { parse_query("q() :- R(x,y", s); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([&] { parse_query("q() R(x,y).", s); }), ErrorCode::kSyntaxError);
  EXPECT_EQ(code_of([&] { parse_query("q() :- U(x,y).", s); }), ErrorCode::kUnknownRelation);
  EXPECT_EQ(code_of([&] { parse_query("q() :- R(x).", s); }), ErrorCode::kArityMismatch);
  EXPECT_EQ(code_of([&] { parse_query("q(w) :- R(x,y).", s); }), ErrorCode::kUnsafeHead);
}

TEST(ParseQuery, AcceptsSelfJoins) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y), R(y,z).", rs_schema());
  EXPECT_FALSE(q.is_self_join_free());
}

TEST(ParseQuery, CollapsesDuplicateAtoms) {
  std::vector<std::string> warnings;
  ConjunctiveQuery q = parse_query("q() :- R(x,y), S(y,z), R(x,y).", rs_schema(), &warnings);
  EXPECT_EQ(q.body.size(), 2u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(ParseQuery, PrintRoundTripOnSuite) {
  for (const Fixture& f : suite()) {
    EXPECT_EQ(parse_query(print_query(f.query), f.schema), f.query) << f.id;
  }
}

TEST(ParseQuery, PrintRoundTripOnRandomQueries) {
  std::mt19937_64 rng(11);
  testkit::QueryShape shape;
  shape.max_atoms = 5;
  shape.constant_percent = 25;
  shape.free_variables = true;
  for (int i = 0; i < 500; ++i) {
    Fixture f = testkit::random_query(rng, shape);
    EXPECT_EQ(parse_query(print_query(f.query), f.schema), f.query) << print_query(f.query);
  }
}

TEST(Substitute, CompanyExample) {
  Fixture f = suite_fixture("company_q");
  ConjunctiveQuery q = substitute(f.query, {{"x", "0011"}});
  ConjunctiveQuery want = parse_query("q() :- Employee('0011',y,z), Manager(y,w,'2020').", f.schema);
  EXPECT_TRUE(q.is_boolean());
  EXPECT_EQ(q.body, want.body);
}

TEST(Substitute, EmptyAssignmentIsIdentity) {
  Fixture f = suite_fixture("qnex");
  EXPECT_EQ(substitute(f.query, {}), f.query);
}

TEST(Substitute, FullHead) {
  ConjunctiveQuery q = parse_query("q(x, w) :- R(x,y), S(y,w).", rs_schema());
  ConjunctiveQuery b = substitute(q, {{"x", "a"}, {"w", "b"}});
  EXPECT_TRUE(b.is_boolean());
  EXPECT_EQ(b.body[0].terms[0], Term::constant("a"));
  EXPECT_EQ(b.body[1].terms[1], Term::constant("b"));
}

TEST(Substitute, RejectsUnknownVariable) {
  ConjunctiveQuery q = parse_query("q(x) :- R(x,y).", rs_schema());
  EXPECT_EQ(code_of([&] { substitute(q, {{"nope", "1"}}); }), ErrorCode::kUnknownVariable);
}

TEST(Substitute, IdempotentAndCommutesWithComponents) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y), S(y,z), T(u,v).", rs_schema());
  std::map<std::string, std::string> a{{"y", "1"}, {"u", "2"}};
  ConjunctiveQuery once = substitute(q, a);
  std::map<std::string, std::string> rest{{"u", "2"}};
  EXPECT_EQ(substitute(substitute(q, {{"y", "1"}}), rest), once);
  // After y is bound R and S no longer share a variable.
  std::vector<ConjunctiveQuery> parts = connected_components(once);
  ASSERT_EQ(parts.size(), 3u);
  std::vector<ConjunctiveQuery> before = connected_components(q);
  ASSERT_EQ(before.size(), 2u);
  EXPECT_EQ(substitute(before[1], rest).body, parts[2].body);
}

TEST(Components, Examples) {
  Schema s = rs_schema();
  auto two = connected_components(parse_query("q() :- R(x,y), S(u,v).", s));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].body[0].relation, "R");
  EXPECT_EQ(two[1].body[0].relation, "S");

  Fixture ex = suite_fixture("qex");
  auto one = connected_components(ex.query);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].body, ex.query.body);

  auto parts = component_indices(parse_query("q() :- R(x,y), S(y,z), T(u,u).", s));
  EXPECT_EQ(parts, (std::vector<std::vector<std::size_t>>{{0, 1}, {2}}));
}

TEST(Components, PartitionTheBody) {
  std::mt19937_64 rng(5);
  testkit::QueryShape shape;
  shape.max_atoms = 6;
  shape.variables = 6;
  for (int i = 0; i < 300; ++i) {
    ConjunctiveQuery q = testkit::random_query(rng, shape).query;
    std::vector<std::vector<std::size_t>> parts = component_indices(q);
    std::vector<std::size_t> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> want(q.body.size());
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(all, want);
    for (std::size_t a = 0; a < parts.size(); ++a) {
      EXPECT_TRUE(subquery(q, parts[a]).is_connected());
      for (std::size_t b = a + 1; b < parts.size(); ++b) {
        for (std::size_t i : parts[a]) {
          for (std::size_t j : parts[b]) {
            for (const std::string& v : q.body[i].vars()) EXPECT_EQ(q.body[j].var_set().count(v), 0u);
          }
        }
      }
    }
  }
}

TEST(Freeze, HeadBecomesConstants) {
  Fixture f = suite_fixture("q4");
  FrozenQuery fz = freeze_head(f.query);
  EXPECT_TRUE(fz.query.is_boolean());
  ASSERT_EQ(fz.var_to_constant.size(), 2u);
  for (const Atom& a : fz.query.body) {
    for (const Term& t : a.terms) {
      if (t.is_variable()) {
        EXPECT_NE(t.text, "z");
        EXPECT_NE(t.text, "d");
      } else {
        EXPECT_TRUE(is_frozen_constant(t));
      }
    }
  }
}
