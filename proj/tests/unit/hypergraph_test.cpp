#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "lincqa/error.hpp"
#include "lincqa/hypergraph.hpp"
#include "lincqa/workbench.hpp"
#include "support.hpp"

using namespace lincqa;

namespace {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

Schema abc_schema() { return parse_schema("R(a*, b, c)\nS(a*, b, c)\nT(a*, b)\nU(a*, b)\n"); }

std::vector<Fixture> small_random_queries(std::uint64_t seed, int count, std::size_t max_atoms) {
  std::mt19937_64 rng(seed);
  testkit::QueryShape shape;
  shape.max_atoms = max_atoms;
  shape.variables = 5;
  std::vector<Fixture> out;
  for (int i = 0; i < count; ++i) out.push_back(testkit::random_query(rng, shape));
  return out;
}

}  // namespace

TEST(JoinTree, BasicShape) {
  JoinTree t(4, {{2, 1}, {0, 1}, {1, 3}});
  EXPECT_TRUE(t.is_tree());
  EXPECT_EQ(t.edges(), (Edges{{0, 1}, {1, 2}, {1, 3}}));
  EXPECT_TRUE(t.has_edge(2, 1));
  EXPECT_FALSE(t.has_edge(0, 2));
  EXPECT_EQ(t.path(0, 3), (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_FALSE(JoinTree(3, {{0, 1}}).is_tree());
  EXPECT_FALSE(JoinTree(3, {{0, 1}, {0, 1}}).is_tree());
}

TEST(Gyo, QexIsEmployeeManagerContactPath) {
  Fixture f = suite_fixture("qex");
  std::optional<JoinTree> t = gyo_join_tree(f.query);
  ASSERT_TRUE(t);
  // Employee(0) - Manager(1) - Contact(2)
  EXPECT_EQ(t->edges(), (Edges{{0, 1}, {1, 2}}));
  EXPECT_TRUE(satisfies_running_intersection(f.query, *t));
}

TEST(Gyo, TriangleIsCyclic) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y,x), S(y,z,z), T(z,x).", abc_schema());
  EXPECT_FALSE(gyo_join_tree(q));
  EXPECT_TRUE(enumerate_join_trees(q).empty());
}

TEST(Gyo, SingleAtom) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y,z).", abc_schema());
  std::optional<JoinTree> t = gyo_join_tree(q);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->size(), 1u);
  EXPECT_TRUE(t->edges().empty());
  EXPECT_EQ(enumerate_join_trees(q).size(), 1u);
}

TEST(Gyo, EveryTreeOfTheSuiteVerifies) {
  for (const Fixture& f : suite()) {
    std::optional<JoinTree> t = gyo_join_tree(f.query);
    ASSERT_TRUE(t) << f.id;
    EXPECT_TRUE(t->is_tree()) << f.id;
    EXPECT_TRUE(satisfies_running_intersection(f.query, *t)) << f.id;
    EXPECT_TRUE(satisfies_running_intersection_by_paths(f.query, *t)) << f.id;
  }
}

TEST(Enumerate, Ex43HasOnlyThePath) {
  Fixture f = suite_fixture("ex43");
  std::vector<JoinTree> trees = enumerate_join_trees(f.query);
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(trees[0].edges(), (Edges{{0, 1}, {1, 2}}));
}

TEST(Enumerate, QexIncludesThePath) {
  Fixture f = suite_fixture("qex");
  std::vector<JoinTree> trees = enumerate_join_trees(f.query);
  EXPECT_NE(std::find(trees.begin(), trees.end(), JoinTree(3, {{0, 1}, {1, 2}})), trees.end());
}

TEST(Enumerate, TwoAtomsGiveOneTree) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y,z), S(y,u,v).", abc_schema());
  std::vector<JoinTree> trees = enumerate_join_trees(q);
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(trees[0].edges(), (Edges{{0, 1}}));
}

TEST(Enumerate, StarOfSharedVariableAllowsEverySpanningTree) {
  // Every atom holds x, so every spanning tree of K4 is a join tree.
  ConjunctiveQuery q = parse_query("q() :- R(x,y,z), S(x,u,v), T(x,w), U(x,s).", abc_schema());
  EXPECT_EQ(enumerate_join_trees(q).size(), 16u);
}

TEST(Enumerate, OrderIsLexicographic) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y,z), S(x,u,v), T(x,w), U(x,s).", abc_schema());
  std::vector<JoinTree> trees = enumerate_join_trees(q);
  for (std::size_t i = 1; i < trees.size(); ++i) EXPECT_LT(trees[i - 1].edges(), trees[i].edges());
}

TEST(Enumerate, EarlyStop) {
  ConjunctiveQuery q = parse_query("q() :- R(x,y,z), S(x,u,v), T(x,w), U(x,s).", abc_schema());
  int seen = 0;
  for_each_join_tree(q, [&](const JoinTree&) { return ++seen < 3; });
  EXPECT_EQ(seen, 3);
}

TEST(Enumerate, GuardAboveTenAtoms) {
  Schema s;
  std::string body;
  for (int i = 0; i < 11; ++i) {
    s.add(RelationSchema{"A" + std::to_string(i), {"k", "v"}, {0}});
    body += (i ? ", A" : "A") + std::to_string(i) + "(x" + std::to_string(i) + ", x" + std::to_string(i + 1) + ")";
  }
  ConjunctiveQuery q = parse_query("q() :- " + body + ".", s);
  try {
    enumerate_join_trees(q);
    FAIL() << "expected TooManyAtoms";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManyAtoms);
  }
  EXPECT_TRUE(gyo_join_tree(q));
}

TEST(Enumerate, EveryTreeVerifiesAndGyoAgrees) {
  int acyclic = 0, cyclic = 0;
  for (const Fixture& f : small_random_queries(21, 600, 6)) {
    std::vector<JoinTree> trees = enumerate_join_trees(f.query);
    std::optional<JoinTree> g = gyo_join_tree(f.query);
    EXPECT_EQ(g.has_value(), !trees.empty()) << print_query(f.query);
    if (g) {
      ++acyclic;
      EXPECT_TRUE(satisfies_running_intersection(f.query, *g));
      EXPECT_NE(std::find(trees.begin(), trees.end(), *g), trees.end()) << print_query(f.query);
    } else {
      ++cyclic;
    }
    for (const JoinTree& t : trees) {
      EXPECT_TRUE(t.is_tree());
      EXPECT_TRUE(satisfies_running_intersection(f.query, t)) << print_query(f.query);
      EXPECT_TRUE(satisfies_running_intersection_by_paths(f.query, t)) << print_query(f.query);
    }
  }
  EXPECT_GT(acyclic, 0);
  EXPECT_GT(cyclic, 0);
}

TEST(RunningIntersection, CheckersAgreeOnArbitraryTrees) {
  // Every spanning tree of the complete graph on the atoms, including ones
  // the enumerator rejects.
  for (const Fixture& f : small_random_queries(33, 200, 4)) {
    std::size_t n = f.query.body.size();
    Edges all;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) all.emplace_back(a, b);
    }
    std::set<Edges> accepted;
    for (const JoinTree& t : enumerate_join_trees(f.query)) accepted.insert(t.edges());
    for (unsigned mask = 0; mask < (1u << all.size()); ++mask) {
      Edges e;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (mask & (1u << i)) e.push_back(all[i]);
      }
      JoinTree t(n, e);
      if (!t.is_tree()) continue;
      bool fast = satisfies_running_intersection(f.query, t);
      EXPECT_EQ(fast, satisfies_running_intersection_by_paths(f.query, t)) << print_query(f.query);
      if (f.query.is_connected()) EXPECT_EQ(fast, accepted.count(t.edges()) > 0) << print_query(f.query);
    }
  }
}

TEST(Rooted, EveryRootGivesADistinctRooting) {
  Fixture f = suite_fixture("q6");
  for (const JoinTree& t : enumerate_join_trees(f.query)) {
    std::set<std::size_t> roots;
    for (std::size_t r = 0; r < t.size(); ++r) {
      RootedJoinTree rt = RootedJoinTree::make(t, r);
      EXPECT_EQ(rt.root, r);
      EXPECT_EQ(rt.parent[r], kNoParent);
      EXPECT_EQ(rt.post_order.size(), t.size());
      EXPECT_EQ(rt.post_order.back(), r);
      roots.insert(rt.root);
    }
    EXPECT_EQ(roots.size(), t.size());
  }
}

TEST(Rooted, ParentsChildrenAndPostOrderAreConsistent) {
  JoinTree t(5, {{0, 1}, {1, 2}, {1, 3}, {3, 4}});
  RootedJoinTree rt = RootedJoinTree::make(t, 1);
  EXPECT_EQ(rt.children[1], (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(rt.parent[4], 3u);
  std::vector<std::size_t> pos(5);
  for (std::size_t i = 0; i < rt.post_order.size(); ++i) pos[rt.post_order[i]] = i;
  for (std::size_t v = 0; v < 5; ++v) {
    for (std::size_t c : rt.children[v]) {
      EXPECT_TRUE(t.has_edge(v, c));
      EXPECT_EQ(rt.parent[c], v);
      EXPECT_LT(pos[c], pos[v]);
    }
  }
  EXPECT_EQ(rt.subtree(3), (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(rt.subtree(1).size(), 5u);
}

TEST(Render, TextAndDot) {
  Fixture f = suite_fixture("qex");
  RootedJoinTree rt = RootedJoinTree::make(*gyo_join_tree(f.query), 0);
  std::string text = to_text(f.query, rt);
  EXPECT_EQ(text.find("Employee"), 0u);
  EXPECT_NE(text.find("\n  Manager"), std::string::npos);
  EXPECT_NE(text.find("\n    Contact"), std::string::npos);
  std::string dot = to_dot(f.query, rt);
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_EQ(to_dot(f.query, rt.tree).rfind("graph", 0), 0u);
}
