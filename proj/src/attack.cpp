#include "lincqa/attack.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "lincqa/error.hpp"

namespace lincqa {

namespace {

std::vector<std::size_t> all_atoms(const ConjunctiveQuery& q) {
  std::vector<std::size_t> out(q.body.size());
  std::iota(out.begin(), out.end(), 0);
  return out;
}

bool shares_outside(const Atom& a, const Atom& b, const std::set<std::string>& closure) {
  for (const Term& t : a.terms) {
    if (!t.is_variable() || closure.count(t.text) > 0) continue;
    for (const Term& u : b.terms) {
      if (u.is_variable() && u.text == t.text) return true;
    }
  }
  return false;
}

// Atoms reachable from f over tree edges inside `subset` whose endpoints share
// a variable outside `closure`.
std::vector<bool> reach(const ConjunctiveQuery& q, const JoinTree& tree, std::size_t f,
                        const std::vector<bool>& in_subset, const std::set<std::string>& closure) {
  std::vector<bool> seen(q.body.size(), false);
  std::vector<std::size_t> stack{f};
  seen[f] = true;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : tree.neighbors(v)) {
      if (seen[w] || !in_subset[w]) continue;
      if (!shares_outside(q.body[v], q.body[w], closure)) continue;
      seen[w] = true;
      stack.push_back(w);
    }
  }
  seen[f] = false;
  return seen;
}

AttackGraph attack_graph_on(const ConjunctiveQuery& q, const JoinTree& tree,
                            const std::vector<std::size_t>& subset) {
  std::size_t n = q.body.size();
  AttackGraph g;
  g.closure.assign(n, {});
  g.attacks.assign(n, std::vector<bool>(n, false));
  std::vector<bool> in(n, false);
  for (std::size_t v : subset) in[v] = true;
  for (std::size_t f : subset) {
    g.closure[f] = key_closure(q, f, subset);
    std::vector<bool> r = reach(q, tree, f, in, g.closure[f]);
    for (std::size_t h = 0; h < n; ++h) g.attacks[f][h] = r[h];
  }
  return g;
}

void require_self_join_free(const ConjunctiveQuery& q) {
  if (!q.is_self_join_free()) {
    throw Error(ErrorCode::kSelfJoin, "query " + q.name + " repeats a relation name");
  }
}

const ConjunctiveQuery& frozen_or_self(const ConjunctiveQuery& q, std::optional<ConjunctiveQuery>& slot) {
  if (q.is_boolean()) return q;
  slot = freeze_head(q).query;
  return *slot;
}

bool is_ppjt(const ConjunctiveQuery& q, const RootedJoinTree& rooted) {
  for (std::size_t v : rooted.post_order) {
    if (!unattacked_in_subtree(q, rooted, v)) return false;
  }
  return true;
}

std::optional<RootedJoinTree> brute_force_connected(const ConjunctiveQuery& q) {
  std::optional<RootedJoinTree> found;
  for_each_join_tree(q, [&](const JoinTree& tree) {
    for (std::size_t root = 0; root < q.body.size(); ++root) {
      RootedJoinTree rooted = RootedJoinTree::make(tree, root);
      if (is_ppjt(q, rooted)) {
        found = std::move(rooted);
        return false;
      }
    }
    return true;
  });
  return found;
}

// Joins per-component rooted trees (given over local atom indices) into one
// rooted tree over q, hanging every later root under the first one.
RootedJoinTree glue(const ConjunctiveQuery& q, const std::vector<std::vector<std::size_t>>& groups,
                    const std::vector<RootedJoinTree>& parts) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t top = groups[0][parts[0].root];
  for (std::size_t c = 0; c < groups.size(); ++c) {
    for (const auto& [a, b] : parts[c].tree.edges()) edges.emplace_back(groups[c][a], groups[c][b]);
    if (c > 0) edges.emplace_back(top, groups[c][parts[c].root]);
  }
  return RootedJoinTree::make(JoinTree(q.body.size(), std::move(edges)), top);
}

bool key_vars_subset(const Atom& a, const Atom& b) {
  std::vector<std::string> ka = a.key_vars();
  std::vector<std::string> kb = b.key_vars();
  for (const std::string& v : ka) {
    if (std::find(kb.begin(), kb.end(), v) == kb.end()) return false;
  }
  return true;
}

// Re-roots the subtree over `subset` at `root` and attaches, under each child
// subtree, an atom that is unattacked there and holds the shared variables.
bool build_fast(const ConjunctiveQuery& q, const JoinTree& tree, const std::vector<std::size_t>& subset,
                std::size_t root, std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::size_t n = q.body.size();
  std::vector<bool> in(n, false);
  for (std::size_t v : subset) in[v] = true;
  std::set<std::string> root_vars = q.body[root].var_set();

  for (std::size_t child : tree.neighbors(root)) {
    if (!in[child]) continue;
    // Atoms on the child's side of the root.
    std::vector<std::size_t> part;
    std::vector<bool> seen(n, false);
    seen[root] = true;
    seen[child] = true;
    std::vector<std::size_t> stack{child};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      part.push_back(v);
      for (std::size_t w : tree.neighbors(v)) {
        if (in[w] && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    std::sort(part.begin(), part.end());

    std::set<std::string> shared;
    for (std::size_t v : part) {
      for (const std::string& x : q.body[v].var_set()) {
        if (root_vars.count(x) > 0) shared.insert(x);
      }
    }
    AttackGraph g = attack_graph_on(q, tree, part);
    std::optional<std::size_t> pick;
    for (std::size_t v : part) {
      if (g.attacked(v)) continue;
      std::set<std::string> vv = q.body[v].var_set();
      if (std::includes(vv.begin(), vv.end(), shared.begin(), shared.end())) {
        pick = v;
        break;
      }
    }
    if (!pick) return false;
    edges.emplace_back(root, *pick);
    if (!build_fast(q, tree, part, *pick, edges)) return false;
  }
  return true;
}

}  // namespace

std::set<std::string> key_closure(const ConjunctiveQuery& q, std::size_t atom,
                                  const std::vector<std::size_t>& atoms) {
  std::vector<std::size_t> scope = atoms.empty() ? all_atoms(q) : atoms;
  std::vector<std::string> start = q.body.at(atom).key_vars();
  std::set<std::string> closure(start.begin(), start.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t g : scope) {
      if (g == atom) continue;
      std::vector<std::string> key = q.body[g].key_vars();
      bool fires = std::all_of(key.begin(), key.end(),
                               [&](const std::string& v) { return closure.count(v) > 0; });
      if (!fires) continue;
      for (const std::string& v : q.body[g].vars()) {
        if (closure.insert(v).second) changed = true;
      }
    }
  }
  return closure;
}

bool AttackGraph::attacked(std::size_t g) const {
  for (std::size_t f = 0; f < attacks.size(); ++f) {
    if (attacks[f][g]) return true;
  }
  return false;
}

std::vector<std::size_t> AttackGraph::unattacked() const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < attacks.size(); ++g) {
    if (!attacked(g)) out.push_back(g);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> AttackGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t f = 0; f < attacks.size(); ++f) {
    for (std::size_t g = 0; g < attacks.size(); ++g) {
      if (attacks[f][g]) out.emplace_back(f, g);
    }
  }
  return out;
}

bool AttackGraph::is_acyclic() const {
  std::size_t n = attacks.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t g = 0; g < n; ++g) indegree[g] += attacks[f][g] ? 1 : 0;
  }
  std::vector<std::size_t> ready;
  for (std::size_t g = 0; g < n; ++g) {
    if (indegree[g] == 0) ready.push_back(g);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    std::size_t f = ready.back();
    ready.pop_back();
    ++removed;
    for (std::size_t g = 0; g < n; ++g) {
      if (attacks[f][g] && --indegree[g] == 0) ready.push_back(g);
    }
  }
  return removed == n;
}

AttackGraph attack_graph(const ConjunctiveQuery& q, const JoinTree& tree) {
  return attack_graph_on(q, tree, all_atoms(q));
}

AttackGraph attack_graph(const ConjunctiveQuery& q) {
  require_self_join_free(q);
  std::optional<ConjunctiveQuery> slot;
  const ConjunctiveQuery& b = frozen_or_self(q, slot);
  std::optional<JoinTree> tree = gyo_join_tree(b);
  if (!tree) throw Error(ErrorCode::kNotAcyclic, "query " + q.name + " has no join tree");
  return attack_graph(b, *tree);
}

bool unattacked_in_subtree(const ConjunctiveQuery& q, const RootedJoinTree& tree, std::size_t v) {
  std::vector<std::size_t> subset = tree.subtree(v);
  std::vector<bool> in(q.body.size(), false);
  for (std::size_t a : subset) in[a] = true;
  for (std::size_t f : subset) {
    if (f == v) continue;
    std::set<std::string> closure = key_closure(q, f, subset);
    if (reach(q, tree.tree, f, in, closure)[v]) return false;
  }
  return true;
}

PpjtCertificate make_certificate(const ConjunctiveQuery& q, const RootedJoinTree& tree) {
  PpjtCertificate cert;
  cert.tree = tree;
  cert.subtree_root_unattacked.assign(q.body.size(), false);
  for (std::size_t v = 0; v < q.body.size(); ++v) {
    cert.subtree_root_unattacked[v] = unattacked_in_subtree(q, tree, v);
  }
  return cert;
}

bool verify_certificate(const ConjunctiveQuery& q, const PpjtCertificate& cert) {
  std::optional<ConjunctiveQuery> slot;
  const ConjunctiveQuery& b = frozen_or_self(q, slot);
  if (!satisfies_running_intersection(b, cert.tree.tree)) return false;
  if (cert.tree.post_order.size() != b.body.size()) return false;
  for (std::size_t v = 0; v < b.body.size(); ++v) {
    if (!unattacked_in_subtree(b, cert.tree, v)) return false;
  }
  return true;
}

std::optional<PpjtCertificate> find_ppjt(const ConjunctiveQuery& q) {
  require_self_join_free(q);
  std::optional<ConjunctiveQuery> slot;
  const ConjunctiveQuery& b = frozen_or_self(q, slot);
  if (b.body.empty()) return std::nullopt;
  if (!gyo_join_tree(b)) throw Error(ErrorCode::kNotAcyclic, "query " + q.name + " has no join tree");

  std::vector<std::vector<std::size_t>> groups = component_indices(b);
  std::vector<RootedJoinTree> parts;
  for (const auto& group : groups) {
    std::optional<RootedJoinTree> part = brute_force_connected(subquery(b, group));
    if (!part) return std::nullopt;
    parts.push_back(std::move(*part));
  }
  RootedJoinTree rooted = groups.size() == 1 ? parts[0] : glue(b, groups, parts);
  PpjtCertificate cert = make_certificate(b, rooted);
  if (!verify_certificate(b, cert)) {
    throw Error(ErrorCode::kInvalidCertificate, "constructed tree failed re-verification");
  }
  return cert;
}

FastPpjtResult find_ppjt_fast(const ConjunctiveQuery& q) {
  require_self_join_free(q);
  std::optional<ConjunctiveQuery> slot;
  const ConjunctiveQuery& b = frozen_or_self(q, slot);
  FastPpjtResult result;
  for (std::size_t f = 0; f < b.body.size(); ++f) {
    for (std::size_t g = 0; g < b.body.size(); ++g) {
      if (f != g && key_vars_subset(b.body[f], b.body[g])) return result;
    }
  }
  std::optional<JoinTree> tree = gyo_join_tree(b);
  if (!tree) throw Error(ErrorCode::kNotAcyclic, "query " + q.name + " has no join tree");
  AttackGraph whole = attack_graph(b, *tree);
  result.status = FastPpjtResult::Status::kNoPpjt;
  if (!whole.is_acyclic()) return result;

  std::vector<std::vector<std::size_t>> groups = component_indices(b);
  std::vector<RootedJoinTree> parts;
  for (const auto& group : groups) {
    ConjunctiveQuery part = subquery(b, group);
    JoinTree part_tree = *gyo_join_tree(part);
    AttackGraph g = attack_graph(part, part_tree);
    std::vector<std::size_t> roots = g.unattacked();
    if (roots.empty()) return result;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    if (!build_fast(part, part_tree, all_atoms(part), roots[0], edges)) return result;
    parts.push_back(RootedJoinTree::make(JoinTree(part.body.size(), std::move(edges)), roots[0]));
  }
  RootedJoinTree rooted = groups.size() == 1 ? parts[0] : glue(b, groups, parts);
  PpjtCertificate cert = make_certificate(b, rooted);
  if (!verify_certificate(b, cert)) return result;
  result.status = FastPpjtResult::Status::kFound;
  result.certificate = std::move(cert);
  return result;
}

bool is_cforest(const ConjunctiveQuery& q) {
  std::optional<ConjunctiveQuery> slot;
  const ConjunctiveQuery& b = frozen_or_self(q, slot);
  std::size_t n = b.body.size();

  std::vector<std::set<std::string>> nonkey(n), keyv(n), vars(n);
  for (std::size_t i = 0; i < n; ++i) {
    vars[i] = b.body[i].var_set();
    std::vector<std::string> k = b.body[i].key_vars();
    keyv[i] = std::set<std::string>(k.begin(), k.end());
    for (const std::string& v : vars[i]) {
      if (keyv[i].count(v) == 0) nonkey[i].insert(v);
    }
  }

  std::vector<std::size_t> parent(n, kNoParent);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t s = 0; s < n; ++s) {
      if (r == s) continue;
      bool arc = std::any_of(nonkey[r].begin(), nonkey[r].end(),
                             [&](const std::string& v) { return vars[s].count(v) > 0; });
      if (!arc) continue;
      if (parent[s] != kNoParent) return false;
      parent[s] = r;
      // Full join: every key variable of s is a non-key variable of r.
      for (const std::string& v : keyv[s]) {
        if (nonkey[r].count(v) == 0) return false;
      }
    }
  }

  std::vector<std::size_t> tree_of(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t v = s;
    for (std::size_t steps = 0; parent[v] != kNoParent; ++steps) {
      if (steps > n) return false;  // cycle
      v = parent[v];
    }
    tree_of[s] = v;
  }

  std::map<std::string, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::string& v : vars[i]) holders[v].push_back(i);
  }
  for (const auto& [var, atoms] : holders) {
    std::set<std::size_t> trees;
    for (std::size_t a : atoms) trees.insert(tree_of[a]);
    if (trees.size() <= 1) continue;
    for (std::size_t a : atoms) {
      if (parent[a] != kNoParent) return false;
    }
  }
  return true;
}

PpjtCertificate require_ppjt(const ConjunctiveQuery& q) {
  std::optional<PpjtCertificate> cert = find_ppjt(q);
  if (!cert) throw Error(ErrorCode::kNoPpjt, "query " + q.name + " has no pair-pruning join tree");
  return *cert;
}

}  // namespace lincqa
