#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lincqa/query.hpp"

namespace lincqa {

inline constexpr std::size_t kMaxEnumeratedAtoms = 10;
inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

/// Undirected tree over body-atom indices. Edges are stored as (a, b) with
/// a < b, sorted lexicographically.
class JoinTree {
 public:
  JoinTree() = default;
  JoinTree(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t size() const { return n_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adjacency_[v]; }
  bool has_edge(std::size_t a, std::size_t b) const;
  bool is_tree() const;

  /// Vertices on the unique path from a to b, both ends included.
  std::vector<std::size_t> path(std::size_t a, std::size_t b) const;

  bool operator==(const JoinTree& other) const { return n_ == other.n_ && edges_ == other.edges_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// A join tree with a chosen root. Children are listed in ascending index.
struct RootedJoinTree {
  JoinTree tree;
  std::size_t root = 0;
  std::vector<std::size_t> parent;
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::size_t> post_order;

  static RootedJoinTree make(const JoinTree& tree, std::size_t root);

  /// Atoms of the subtree rooted at v, ascending.
  std::vector<std::size_t> subtree(std::size_t v) const;

  bool operator==(const RootedJoinTree& other) const {
    return tree == other.tree && root == other.root;
  }
};

/// Checks that `tree` spans the body of q and that, for every variable,
/// the atoms containing it induce a connected subtree.
bool satisfies_running_intersection(const ConjunctiveQuery& q, const JoinTree& tree);

/// Direct path-based check: shared variables of every atom pair occur on
/// every atom of the connecting path. Slower; used as a cross-check.
bool satisfies_running_intersection_by_paths(const ConjunctiveQuery& q, const JoinTree& tree);

/// GYO ear removal. std::nullopt when q is not acyclic.
std::optional<JoinTree> gyo_join_tree(const ConjunctiveQuery& q);

/// Calls `visit` on every join tree of q in lexicographic edge order until it
/// returns false. Connected queries only use edges between atoms that share a
/// variable. Throws kTooManyAtoms above kMaxEnumeratedAtoms.
void for_each_join_tree(const ConjunctiveQuery& q,
                        const std::function<bool(const JoinTree&)>& visit);

std::vector<JoinTree> enumerate_join_trees(const ConjunctiveQuery& q);

std::string to_text(const ConjunctiveQuery& q, const RootedJoinTree& tree);
std::string to_dot(const ConjunctiveQuery& q, const RootedJoinTree& tree);
std::string to_dot(const ConjunctiveQuery& q, const JoinTree& tree);

}  // namespace lincqa
