#include "lincqa/hypergraph.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "lincqa/error.hpp"

namespace lincqa {

namespace {

// has[a][v]: atom a mentions variable v (variables indexed by first occurrence).
std::vector<std::vector<bool>> incidence(const ConjunctiveQuery& q) {
  std::vector<std::string> vars = q.variables();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vars.size(); ++i) index[vars[i]] = i;
  std::vector<std::vector<bool>> has(q.body.size(), std::vector<bool>(vars.size(), false));
  for (std::size_t a = 0; a < q.body.size(); ++a) {
    for (const Term& t : q.body[a].terms) {
      if (t.is_variable()) has[a][index[t.text]] = true;
    }
  }
  return has;
}

bool share(const std::vector<bool>& a, const std::vector<bool>& b) {
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (a[v] && b[v]) return true;
  }
  return false;
}

// RIP on each component of a forest given by `edges` restricted to `members`.
bool forest_component_ok(const std::vector<std::vector<bool>>& has,
                         const std::vector<std::size_t>& members,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                         const std::vector<bool>& in_component) {
  std::size_t nvars = has.empty() ? 0 : has[0].size();
  for (std::size_t v = 0; v < nvars; ++v) {
    std::size_t atoms = 0;
    for (std::size_t a : members) atoms += has[a][v] ? 1 : 0;
    if (atoms <= 1) continue;
    std::size_t links = 0;
    for (const auto& [a, b] : edges) {
      if (in_component[a] && in_component[b] && has[a][v] && has[b][v]) ++links;
    }
    if (links != atoms - 1) return false;
  }
  return true;
}

}  // namespace

JoinTree::JoinTree(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges)
    : n_(n), adjacency_(n) {
  for (auto& [a, b] : edges) {
    if (a > b) std::swap(a, b);
    if (b >= n || a == b) throw Error(ErrorCode::kInvalidCertificate, "bad join tree edge");
  }
  std::sort(edges.begin(), edges.end());
  edges_ = std::move(edges);
  for (const auto& [a, b] : edges_) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

bool JoinTree::has_edge(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(a, b));
}

bool JoinTree::is_tree() const {
  if (n_ == 0) return false;
  if (edges_.size() != n_ - 1) return false;
  std::vector<bool> seen(n_, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : adjacency_[v]) {
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n_;
}

std::vector<std::size_t> JoinTree::path(std::size_t a, std::size_t b) const {
  std::vector<std::size_t> prev(n_, kNoParent);
  std::vector<bool> seen(n_, false);
  std::vector<std::size_t> queue{a};
  seen[a] = true;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    std::size_t v = queue[i];
    if (v == b) break;
    for (std::size_t w : adjacency_[v]) {
      if (!seen[w]) {
        seen[w] = true;
        prev[w] = v;
        queue.push_back(w);
      }
    }
  }
  if (!seen[b]) return {};
  std::vector<std::size_t> out;
  for (std::size_t v = b; v != kNoParent; v = prev[v]) out.push_back(v);
  std::reverse(out.begin(), out.end());
  return out;
}

RootedJoinTree RootedJoinTree::make(const JoinTree& tree, std::size_t root) {
  RootedJoinTree r;
  r.tree = tree;
  r.root = root;
  std::size_t n = tree.size();
  r.parent.assign(n, kNoParent);
  r.children.assign(n, {});
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> order{root};
  seen[root] = true;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t v = order[i];
    for (std::size_t w : tree.neighbors(v)) {
      if (seen[w]) continue;
      seen[w] = true;
      r.parent[w] = v;
      r.children[v].push_back(w);
      order.push_back(w);
    }
  }
  // Iterative post-order, children in ascending index.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < r.children[v].size()) {
      std::size_t c = r.children[v][next++];
      stack.emplace_back(c, 0);
    } else {
      r.post_order.push_back(v);
      stack.pop_back();
    }
  }
  return r;
}

std::vector<std::size_t> RootedJoinTree::subtree(std::size_t v) const {
  std::vector<std::size_t> out{v};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t c : children[out[i]]) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool satisfies_running_intersection(const ConjunctiveQuery& q, const JoinTree& tree) {
  if (tree.size() != q.body.size() || !tree.is_tree()) return false;
  std::vector<std::size_t> all(q.body.size());
  std::iota(all.begin(), all.end(), 0);
  return forest_component_ok(incidence(q), all, tree.edges(),
                             std::vector<bool>(q.body.size(), true));
}

bool satisfies_running_intersection_by_paths(const ConjunctiveQuery& q, const JoinTree& tree) {
  if (tree.size() != q.body.size() || !tree.is_tree()) return false;
  for (std::size_t a = 0; a < q.body.size(); ++a) {
    std::set<std::string> va = q.body[a].var_set();
    for (std::size_t b = a + 1; b < q.body.size(); ++b) {
      for (const std::string& v : q.body[b].var_set()) {
        if (va.count(v) == 0) continue;
        for (std::size_t c : tree.path(a, b)) {
          if (q.body[c].var_set().count(v) == 0) return false;
        }
      }
    }
  }
  return true;
}

std::optional<JoinTree> gyo_join_tree(const ConjunctiveQuery& q) {
  std::size_t n = q.body.size();
  if (n == 0) return std::nullopt;
  auto has = incidence(q);
  std::size_t nvars = has[0].size();
  std::vector<bool> alive(n, true);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t remaining = n; remaining > 1; --remaining) {
    bool removed = false;
    for (std::size_t e = 0; e < n && !removed; ++e) {
      if (!alive[e]) continue;
      // Variables of e shared with some other live atom.
      std::vector<bool> shared(nvars, false);
      for (std::size_t v = 0; v < nvars; ++v) {
        if (!has[e][v]) continue;
        for (std::size_t o = 0; o < n; ++o) {
          if (o != e && alive[o] && has[o][v]) {
            shared[v] = true;
            break;
          }
        }
      }
      for (std::size_t w = 0; w < n; ++w) {
        if (w == e || !alive[w]) continue;
        bool covers = true;
        for (std::size_t v = 0; v < nvars && covers; ++v) {
          if (shared[v] && !has[w][v]) covers = false;
        }
        if (covers) {
          edges.emplace_back(e, w);
          alive[e] = false;
          removed = true;
          break;
        }
      }
    }
    if (!removed) return std::nullopt;
  }
  return JoinTree(n, std::move(edges));
}

void for_each_join_tree(const ConjunctiveQuery& q,
                        const std::function<bool(const JoinTree&)>& visit) {
  std::size_t n = q.body.size();
  if (n > kMaxEnumeratedAtoms) {
    throw Error(ErrorCode::kTooManyAtoms,
                std::to_string(n) + " atoms exceeds the enumeration guard of " +
                    std::to_string(kMaxEnumeratedAtoms));
  }
  if (n == 0) return;
  if (n == 1) {
    visit(JoinTree(1, {}));
    return;
  }
  auto has = incidence(q);
  bool connected = q.is_connected();
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!connected || share(has[a], has[b])) candidates.emplace_back(a, b);
    }
  }

  std::vector<std::size_t> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  bool stop = false;

  std::function<void(std::size_t)> rec = [&](std::size_t next) {
    if (stop) return;
    if (chosen.size() == n - 1) {
      if (!visit(JoinTree(n, chosen))) stop = true;
      return;
    }
    if (candidates.size() - next < (n - 1) - chosen.size()) return;
    for (std::size_t i = next; i < candidates.size() && !stop; ++i) {
      auto [a, b] = candidates[i];
      std::size_t ca = comp[a], cb = comp[b];
      if (ca == cb) continue;
      std::vector<std::size_t> saved = comp;
      for (std::size_t& c : comp) {
        if (c == cb) c = ca;
      }
      chosen.emplace_back(a, b);
      std::vector<std::size_t> members;
      std::vector<bool> in(n, false);
      for (std::size_t v = 0; v < n; ++v) {
        if (comp[v] == ca) {
          members.push_back(v);
          in[v] = true;
        }
      }
      if (forest_component_ok(has, members, chosen, in)) rec(i + 1);
      chosen.pop_back();
      comp = std::move(saved);
    }
  };
  rec(0);
}

std::vector<JoinTree> enumerate_join_trees(const ConjunctiveQuery& q) {
  std::vector<JoinTree> out;
  for_each_join_tree(q, [&](const JoinTree& t) {
    out.push_back(t);
    return true;
  });
  return out;
}

std::string to_text(const ConjunctiveQuery& q, const RootedJoinTree& tree) {
  std::string out;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t v, std::size_t depth) {
    out += std::string(2 * depth, ' ') + print_atom(q.body[v]) + "\n";
    for (std::size_t c : tree.children[v]) rec(c, depth + 1);
  };
  if (tree.tree.size() > 0) rec(tree.root, 0);
  return out;
}

namespace {

std::string dot_label(const Atom& a) {
  std::string s = print_atom(a);
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\0') {
      out += '$';
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::string to_dot(const ConjunctiveQuery& q, const RootedJoinTree& tree) {
  std::string out = "digraph join_tree {\n";
  for (std::size_t v = 0; v < q.body.size(); ++v) {
    out += "  n" + std::to_string(v) + " [label=\"" + dot_label(q.body[v]) + "\"" +
           (v == tree.root ? ", shape=box" : "") + "];\n";
  }
  for (std::size_t v = 0; v < q.body.size(); ++v) {
    for (std::size_t c : tree.children[v]) {
      out += "  n" + std::to_string(v) + " -> n" + std::to_string(c) + ";\n";
    }
  }
  return out + "}\n";
}

std::string to_dot(const ConjunctiveQuery& q, const JoinTree& tree) {
  std::string out = "graph join_tree {\n";
  for (std::size_t v = 0; v < q.body.size(); ++v) {
    out += "  n" + std::to_string(v) + " [label=\"" + dot_label(q.body[v]) + "\"];\n";
  }
  for (const auto& [a, b] : tree.edges()) {
    out += "  n" + std::to_string(a) + " -- n" + std::to_string(b) + ";\n";
  }
  return out + "}\n";
}

}  // namespace lincqa
