#include <gtest/gtest.h>

#include <random>
#include <set>

#include "lincqa/attack.hpp"
#include "lincqa/error.hpp"
#include "lincqa/workbench.hpp"
#include "support.hpp"

using namespace lincqa;

namespace {

using Vars = std::set<std::string>;

Schema rs_schema() { return parse_schema("R(a*, b)\nS(a*, b)\nS3(a*, b*, c)\nT(a*, b)\n"); }

// Naive fixpoint over FDs key(G) -> vars(G), G != F.
Vars naive_closure(const ConjunctiveQuery& q, std::size_t f) {
  std::vector<std::string> k = q.body[f].key_vars();
  Vars out(k.begin(), k.end());
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t g = 0; g < q.body.size(); ++g) {
      if (g == f) continue;
      bool fires = true;
      for (const std::string& v : q.body[g].key_vars()) fires = fires && out.count(v) > 0;
      if (!fires) continue;
      for (const std::string& v : q.body[g].vars()) changed = out.insert(v).second || changed;
    }
  }
  return out;
}

// Acyclic, connected, self-join-free random Boolean queries.
std::vector<ConjunctiveQuery> random_acyclic(std::uint64_t seed, int count, std::size_t max_atoms) {
  std::mt19937_64 rng(seed);
  testkit::QueryShape shape;
  shape.max_atoms = max_atoms;
  shape.variables = 5;
  std::vector<ConjunctiveQuery> out;
  while (static_cast<int>(out.size()) < count) {
    ConjunctiveQuery q = testkit::random_query(rng, shape).query;
    if (q.is_connected() && gyo_join_tree(q)) out.push_back(q);
  }
  return out;
}

}  // namespace

TEST(KeyClosure, CompanyExample) {
  ConjunctiveQuery q = freeze_head(suite_fixture("company_q").query).query;
  // x is frozen, so Employee's key is empty and its FD always fires.
  EXPECT_EQ(key_closure(q, 0), (Vars{}));
  EXPECT_EQ(key_closure(q, 1), (Vars{"y", "z"}));
  ConjunctiveQuery b = parse_query("q() :- Employee(x,y,z), Manager(y,w,'2020').", company_schema());
  EXPECT_EQ(key_closure(b, 0), (Vars{"x"}));
  EXPECT_EQ(key_closure(b, 1), (Vars{"y"}));
}

TEST(KeyClosure, SingleAtomIsItsKey) {
  ConjunctiveQuery q = parse_query("q() :- S3(x,y,z).", rs_schema());
  EXPECT_EQ(key_closure(q, 0), (Vars{"x", "y"}));
}

TEST(KeyClosure, FdOfTheOtherAtomNeedsItsKey) {
  // key(S) = {y} is not implied by {x}, so nothing fires from R.
  ConjunctiveQuery q = parse_query("q() :- R(x,y), S(y,z).", rs_schema());
  EXPECT_EQ(key_closure(q, 0), (Vars{"x"}));
  EXPECT_EQ(key_closure(q, 1), (Vars{"y"}));
  // Here key(S) = {x} does fire from R.
  ConjunctiveQuery p = parse_query("q() :- R(x,y), S(x,z), T(z,w).", rs_schema());
  EXPECT_EQ(key_closure(p, 0), (Vars{"x", "z", "w"}));
}

TEST(KeyClosure, MatchesNaiveFixpoint) {
  for (const ConjunctiveQuery& q : random_acyclic(3, 400, 5)) {
    for (std::size_t f = 0; f < q.body.size(); ++f) EXPECT_EQ(key_closure(q, f), naive_closure(q, f)) << print_query(q);
  }
}

TEST(AttackGraph, CompanyEmployeeAttacksManager) {
  AttackGraph g = attack_graph(suite_fixture("company_q").query);
  EXPECT_TRUE(g.attacks[0][1]);
  EXPECT_FALSE(g.attacks[1][0]);
  EXPECT_TRUE(g.is_acyclic());
  EXPECT_EQ(g.unattacked(), (std::vector<std::size_t>{0}));
}

TEST(AttackGraph, Ex43IsAcyclic) {
  EXPECT_TRUE(attack_graph(suite_fixture("ex43").query).is_acyclic());
}

TEST(AttackGraph, SingleAtomHasNoEdges) {
  AttackGraph g = attack_graph(parse_query("q() :- R(x,y).", rs_schema()));
  EXPECT_TRUE(g.edges().empty());
  EXPECT_FALSE(g.attacked(0));
}

TEST(AttackGraph, CyclicAttacks) {
  // R(x,y), S(y,x): each attacks the other.
  AttackGraph g = attack_graph(parse_query("q() :- R(x,y), S(y,x).", rs_schema()));
  EXPECT_FALSE(g.is_acyclic());
  EXPECT_FALSE(find_ppjt(parse_query("q() :- R(x,y), S(y,x).", rs_schema())));
}

TEST(AttackGraph, Errors) {
  try {
    attack_graph(parse_query("q() :- R(x,y), R(y,x).", rs_schema()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSelfJoin);
  }
  Schema s = parse_schema("A(a*, b)\nB(a*, b)\nC(a*, b)\n");
  try {
    attack_graph(parse_query("q() :- A(x,y), B(y,z), C(z,x).", s));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotAcyclic);
  }
}

TEST(AttackGraph, IndependentOfTheJoinTree) {
  for (const ConjunctiveQuery& q : random_acyclic(8, 500, 4)) {
    std::vector<JoinTree> trees = enumerate_join_trees(q);
    ASSERT_FALSE(trees.empty());
    AttackGraph first = attack_graph(q, trees[0]);
    for (const JoinTree& t : trees) EXPECT_EQ(attack_graph(q, t), first) << print_query(q);
  }
}

TEST(FindPpjt, QexRootedAtEmployee) {
  Fixture f = suite_fixture("qex");
  std::optional<PpjtCertificate> c = find_ppjt(f.query);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->tree.root, 0u);
  EXPECT_TRUE(verify_certificate(f.query, *c));
  // The star around Employee comes first in enumeration order; the path
  // rooted at Employee is a PPJT as well.
  EXPECT_EQ(c->tree.tree.edges(), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}}));
  JoinTree path(3, {{0, 1}, {1, 2}});
  EXPECT_TRUE(verify_certificate(f.query, make_certificate(f.query, RootedJoinTree::make(path, 0))));
}

TEST(FindPpjt, Ex43HasNone) {
  Fixture f = suite_fixture("ex43");
  EXPECT_FALSE(find_ppjt(f.query));
  try {
    require_ppjt(f.query);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPpjt);
  }
  // No root of the only tree works.
  JoinTree t = enumerate_join_trees(f.query).at(0);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_FALSE(verify_certificate(f.query, make_certificate(f.query, RootedJoinTree::make(t, r))));
  }
}

TEST(FindPpjt, SyntheticQueriesAllHaveOne) {
  for (int i = 1; i <= 7; ++i) {
    Fixture f = suite_fixture("q" + std::to_string(i));
    std::optional<PpjtCertificate> c = find_ppjt(f.query);
    ASSERT_TRUE(c) << f.id;
    EXPECT_TRUE(verify_certificate(freeze_head(f.query).query, *c)) << f.id;
  }
}

TEST(FindPpjt, DisconnectedQueriesAreGlued) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y), S(y,z), T(u,v).", rs_schema());
  std::optional<PpjtCertificate> c = find_ppjt(q);
  ASSERT_TRUE(c);
  EXPECT_TRUE(c->tree.tree.is_tree());
  EXPECT_TRUE(verify_certificate(q, *c));
}

TEST(FindPpjt, RejectsTamperedCertificates) {
  Fixture f = suite_fixture("qex");
  // Rooted at Contact, Manager's subtree contains Employee which attacks it.
  PpjtCertificate bad = make_certificate(f.query, RootedJoinTree::make(JoinTree(3, {{0, 1}, {1, 2}}), 2));
  EXPECT_FALSE(verify_certificate(f.query, bad));
  // R-S, R-T is not a join tree of ex43: z is missing from R.
  Fixture ex = suite_fixture("ex43");
  PpjtCertificate cyc = make_certificate(ex.query, RootedJoinTree::make(JoinTree(3, {{0, 1}, {0, 2}}), 0));
  EXPECT_FALSE(verify_certificate(ex.query, cyc));
}

TEST(FastPpjt, NotApplicableWhenKeysNest) {
  Schema s = parse_schema("R(a*, b)\nS(a*, b*, c, d)\n");
  FastPpjtResult r = find_ppjt_fast(parse_query("q() :- R(x,y), S(x,z,w,y).", s));
  EXPECT_EQ(r.status, FastPpjtResult::Status::kNotApplicable);
  // Manager and Contact share the key {y}.
  EXPECT_EQ(find_ppjt_fast(suite_fixture("qex").query).status, FastPpjtResult::Status::kNotApplicable);
}

TEST(FastPpjt, FrozenKeyIsNotApplicable) {
  // Freezing x leaves R with an empty key, which every key contains.
  EXPECT_EQ(find_ppjt_fast(suite_fixture("2path").query).status, FastPpjtResult::Status::kNotApplicable);
}

TEST(FastPpjt, TwoAtomQueries) {
  for (const std::string id : {"q1", "q2", "q5"}) {
    Fixture f = suite_fixture(id);
    FastPpjtResult r = find_ppjt_fast(f.query);
    ASSERT_EQ(r.status, FastPpjtResult::Status::kFound) << id;
    EXPECT_TRUE(verify_certificate(freeze_head(f.query).query, *r.certificate)) << id;
  }
}

TEST(FastPpjt, AgreesWithBruteForce) {
  int applicable = 0;
  for (const ConjunctiveQuery& q : random_acyclic(13, 1000, 4)) {
    FastPpjtResult r = find_ppjt_fast(q);
    if (r.status == FastPpjtResult::Status::kNotApplicable) continue;
    ++applicable;
    bool brute = find_ppjt(q).has_value();
    EXPECT_EQ(r.status == FastPpjtResult::Status::kFound, brute) << print_query(q);
    if (r.certificate) EXPECT_TRUE(verify_certificate(q, *r.certificate)) << print_query(q);
  }
  EXPECT_GT(applicable, 50);
}

TEST(CForest, Examples) {
  EXPECT_FALSE(is_cforest(suite_fixture("q5").query));
  EXPECT_TRUE(is_cforest(suite_fixture("q1").query));
  EXPECT_TRUE(is_cforest(parse_query("q() :- R(x,y).", rs_schema())));
}

TEST(Properties, PpjtImpliesAcyclicAttackGraphAndCForestImpliesPpjt) {
  std::vector<ConjunctiveQuery> queries = random_acyclic(17, 1000, 4);
  for (const Fixture& f : suite()) queries.push_back(f.query);
  int with_ppjt = 0, forest = 0;
  for (const ConjunctiveQuery& q : queries) {
    std::optional<PpjtCertificate> c = find_ppjt(q);
    if (c) {
      ++with_ppjt;
      EXPECT_TRUE(attack_graph(q).is_acyclic()) << print_query(q);
      EXPECT_TRUE(verify_certificate(q.is_boolean() ? q : freeze_head(q).query, *c)) << print_query(q);
    }
    if (is_cforest(q)) {
      ++forest;
      EXPECT_TRUE(c.has_value()) << print_query(q);
    }
  }
  EXPECT_GT(with_ppjt, 100);
  EXPECT_GT(forest, 50);
}
