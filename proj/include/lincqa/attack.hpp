#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lincqa/hypergraph.hpp"
#include "lincqa/query.hpp"

namespace lincqa {

/// K+(F, q) restricted to the atoms listed in `atoms` (all atoms when empty).
std::set<std::string> key_closure(const ConjunctiveQuery& q, std::size_t atom,
                                  const std::vector<std::size_t>& atoms = {});

struct AttackGraph {
  std::vector<std::set<std::string>> closure;
  // attacks[f][g]: f attacks g.
  std::vector<std::vector<bool>> attacks;

  std::size_t size() const { return attacks.size(); }
  bool attacked(std::size_t g) const;
  std::vector<std::size_t> unattacked() const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  bool is_acyclic() const;

  bool operator==(const AttackGraph&) const = default;
};

/// Attack graph computed on the given join tree. Non-Boolean queries must be
/// frozen by the caller.
AttackGraph attack_graph(const ConjunctiveQuery& q, const JoinTree& tree);

/// Freezes the head, builds a GYO join tree, and computes the attack graph.
/// Throws kNotAcyclic or kSelfJoin.
AttackGraph attack_graph(const ConjunctiveQuery& q);

/// True when no atom of the subtree rooted at `v` attacks `v` in the
/// subtree's query.
bool unattacked_in_subtree(const ConjunctiveQuery& q, const RootedJoinTree& tree, std::size_t v);

struct PpjtCertificate {
  RootedJoinTree tree;
  std::vector<bool> subtree_root_unattacked;  // per atom

  bool operator==(const PpjtCertificate& other) const { return tree == other.tree; }
};

/// Re-checks the join tree and the unattacked condition on every subtree.
bool verify_certificate(const ConjunctiveQuery& q, const PpjtCertificate& cert);
PpjtCertificate make_certificate(const ConjunctiveQuery& q, const RootedJoinTree& tree);

/// Brute-force search: trees in enumeration order, roots in atom order.
/// Non-Boolean queries are frozen first. Disconnected queries are solved per
/// component and the component trees are joined under the first root.
/// Throws kSelfJoin, kNotAcyclic, kTooManyAtoms.
std::optional<PpjtCertificate> find_ppjt(const ConjunctiveQuery& q);

struct FastPpjtResult {
  enum class Status { kFound, kNotApplicable, kNoPpjt };
  Status status = Status::kNotApplicable;
  std::optional<PpjtCertificate> certificate;
};

/// Top-down construction valid when the keys of any two atoms are
/// incomparable under inclusion. Reports kNotApplicable otherwise.
FastPpjtResult find_ppjt_fast(const ConjunctiveQuery& q);

/// Join-graph forest test with full non-key-to-key joins. Non-Boolean
/// queries are frozen first.
bool is_cforest(const ConjunctiveQuery& q);

/// find_ppjt, throwing kNoPpjt when no PPJT exists.
PpjtCertificate require_ppjt(const ConjunctiveQuery& q);

}  // namespace lincqa
