#include "lincqa/engine.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <limits>
#include <memory>
#include <numeric>

#include "lincqa/error.hpp"
#include "lincqa/hypergraph.hpp"

namespace lincqa {

namespace {

// Resolves query constants to ids; constants absent from the data get ids
// past the dictionary so they never match a stored value.
class ConstantPool {
 public:
  explicit ConstantPool(const Dictionary& dict) : dict_(dict) {}

  ValueId id(const std::string& value) {
    if (auto v = dict_.lookup(value)) return *v;
    auto it = extra_.find(value);
    if (it != extra_.end()) return it->second;
    ValueId v = static_cast<ValueId>(dict_.size() + extra_.size());
    extra_.emplace(value, v);
    names_.emplace(v, value);
    return v;
  }

  std::string name(ValueId v) const {
    if (v < dict_.size()) return dict_.value(v);
    return names_.at(v);
  }

 private:
  const Dictionary& dict_;
  std::unordered_map<std::string, ValueId> extra_;
  std::unordered_map<ValueId, std::string> names_;
};

// Term of an atom compiled against a variable numbering.
struct Slot {
  bool is_var = false;
  int var = -1;
  ValueId constant = 0;
};

std::vector<Slot> compile_terms(const std::vector<Term>& terms, std::map<std::string, int>& vars,
                                ConstantPool& pool) {
  std::vector<Slot> out;
  for (const Term& t : terms) {
    Slot s;
    if (t.is_variable()) {
      s.is_var = true;
      auto [it, inserted] = vars.emplace(t.text, static_cast<int>(vars.size()));
      s.var = it->second;
    } else {
      s.constant = pool.id(t.text);
    }
    out.push_back(s);
  }
  return out;
}

// Rows of `source` matching the slot pattern, projected onto the distinct
// variables listed in `keep` (a subset of the pattern's variables).
TupleSet select_project(const TupleSet& source, const std::vector<Slot>& slots,
                        const std::vector<int>& keep, const std::vector<bool>* row_filter = nullptr) {
  // First position of each variable, and equality checks for repeats.
  std::map<int, std::size_t> first;
  std::vector<std::pair<std::size_t, std::size_t>> repeats;
  std::vector<std::pair<std::size_t, ValueId>> constants;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].is_var) {
      constants.emplace_back(i, slots[i].constant);
      continue;
    }
    auto [it, inserted] = first.emplace(slots[i].var, i);
    if (!inserted) repeats.emplace_back(it->second, i);
  }
  std::vector<std::size_t> positions;
  for (int v : keep) positions.push_back(first.at(v));

  TupleSet out(keep.size());
  std::vector<ValueId> buf(keep.size());
  for (std::size_t r = 0; r < source.size(); ++r) {
    if (row_filter != nullptr && !(*row_filter)[r]) continue;
    const ValueId* row = source.row(r);
    bool ok = true;
    for (const auto& [p, c] : constants) {
      if (row[p] != c) {
        ok = false;
        break;
      }
    }
    for (const auto& [a, b] : repeats) {
      if (!ok) break;
      if (row[a] != row[b]) ok = false;
    }
    if (!ok) continue;
    for (std::size_t i = 0; i < positions.size(); ++i) buf[i] = row[positions[i]];
    out.insert(buf.data());
    if (keep.empty()) break;
  }
  return out;
}

std::vector<int> distinct_vars(const std::vector<Slot>& slots) {
  std::vector<int> out;
  for (const Slot& s : slots) {
    if (s.is_var && std::find(out.begin(), out.end(), s.var) == out.end()) out.push_back(s.var);
  }
  return out;
}

// Row-major table whose columns carry variable ids. Rows are distinct only
// where the producer says so.
struct VarTable {
  std::vector<int> vars;
  std::vector<ValueId> data;
  std::size_t rows = 0;

  const ValueId* row(std::size_t i) const { return data.data() + i * vars.size(); }
  void append(const ValueId* r) {
    data.insert(data.end(), r, r + vars.size());
    ++rows;
  }
};

std::vector<std::size_t> columns_of(const std::vector<int>& vars, const std::vector<int>& wanted) {
  std::vector<std::size_t> out;
  for (int v : wanted) {
    out.push_back(static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin()));
  }
  return out;
}

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  for (int v : a) {
    if (std::find(b.begin(), b.end(), v) != b.end()) out.push_back(v);
  }
  return out;
}

bool covers(const std::vector<int>& wanted, const std::vector<int>& all) {
  return std::all_of(all.begin(), all.end(),
                     [&](int v) { return std::find(wanted.begin(), wanted.end(), v) != wanted.end(); });
}

// Natural join of two duplicate-free tables projected onto `out_vars`.
VarTable join_project(const VarTable& a, const VarTable& b, const std::vector<int>& out_vars) {
  std::vector<int> shared = intersect(a.vars, b.vars);
  std::vector<std::size_t> bcols = columns_of(b.vars, shared);
  std::vector<std::size_t> acols = columns_of(a.vars, shared);
  Grouping index = Grouping::build(b.data.data(), b.rows, b.vars.size(), bcols);

  // Output column sources: (from_a, column).
  std::vector<std::pair<bool, std::size_t>> src;
  for (int v : out_vars) {
    auto ia = std::find(a.vars.begin(), a.vars.end(), v);
    if (ia != a.vars.end()) {
      src.emplace_back(true, ia - a.vars.begin());
    } else {
      src.emplace_back(false, std::find(b.vars.begin(), b.vars.end(), v) - b.vars.begin());
    }
  }
  // Keeping every column of both inputs keeps the output duplicate-free.
  bool dedupe = !covers(out_vars, a.vars) || !covers(out_vars, b.vars);
  TupleSet seen(dedupe ? out_vars.size() : 0);
  VarTable out{out_vars, {}, 0};
  std::vector<ValueId> key(shared.size());
  std::vector<ValueId> buf(out_vars.size());
  for (std::size_t r = 0; r < a.rows; ++r) {
    const ValueId* ar = a.row(r);
    for (std::size_t i = 0; i < acols.size(); ++i) key[i] = ar[acols[i]];
    std::size_t g = index.group_of(key.data());
    if (g == TupleSet::npos) continue;
    for (std::uint32_t k = index.offsets[g]; k < index.offsets[g + 1]; ++k) {
      const ValueId* br = b.row(index.rows[k]);
      for (std::size_t i = 0; i < src.size(); ++i) buf[i] = src[i].first ? ar[src[i].second] : br[src[i].second];
      if (!dedupe || seen.insert(buf.data()).second) out.append(buf.data());
    }
  }
  return out;
}

// Duplicate-free projection of a table onto `keep`.
VarTable project(const VarTable& t, const std::vector<int>& keep) {
  if (keep == t.vars) return t;
  std::vector<std::size_t> cols = columns_of(t.vars, keep);
  bool dedupe = !covers(keep, t.vars);
  TupleSet seen(dedupe ? keep.size() : 0);
  VarTable out{keep, {}, 0};
  std::vector<ValueId> buf(keep.size());
  for (std::size_t r = 0; r < t.rows; ++r) {
    const ValueId* row = t.row(r);
    for (std::size_t i = 0; i < cols.size(); ++i) buf[i] = row[cols[i]];
    if (!dedupe || seen.insert(buf.data()).second) out.append(buf.data());
    if (keep.empty()) break;
  }
  return out;
}

struct JoinAtom {
  const TupleSet* rows;
  std::vector<Slot> slots;
  const std::vector<bool>* row_filter = nullptr;
};

// One atom during Yannakakis: its source rows, the columns holding each
// distinct variable, and the surviving row ids.
struct Node {
  const TupleSet* src = nullptr;
  std::vector<int> vars;
  std::vector<std::size_t> cols;
  std::vector<std::uint32_t> alive;
};

Node make_node(const JoinAtom& atom) {
  Node n;
  n.src = atom.rows;
  std::vector<std::pair<std::size_t, ValueId>> constants;
  std::vector<std::pair<std::size_t, std::size_t>> repeats;
  for (std::size_t i = 0; i < atom.slots.size(); ++i) {
    const Slot& s = atom.slots[i];
    if (!s.is_var) {
      constants.emplace_back(i, s.constant);
      continue;
    }
    auto it = std::find(n.vars.begin(), n.vars.end(), s.var);
    if (it == n.vars.end()) {
      n.vars.push_back(s.var);
      n.cols.push_back(i);
    } else {
      repeats.emplace_back(n.cols[it - n.vars.begin()], i);
    }
  }
  n.alive.reserve(n.src->size());
  for (std::size_t r = 0; r < n.src->size(); ++r) {
    if (atom.row_filter != nullptr && !(*atom.row_filter)[r]) continue;
    const ValueId* row = n.src->row(r);
    bool ok = true;
    for (const auto& [p, c] : constants) ok = ok && row[p] == c;
    for (const auto& [x, y] : repeats) ok = ok && row[x] == row[y];
    if (ok) n.alive.push_back(static_cast<std::uint32_t>(r));
  }
  return n;
}

// Keeps the alive rows of `target` that agree with an alive row of `filter`
// on their shared variables.
void semijoin(Node& target, const Node& filter) {
  std::vector<int> shared = intersect(target.vars, filter.vars);
  if (shared.empty()) {
    if (filter.alive.empty()) target.alive.clear();
    return;
  }
  std::vector<std::size_t> fcols, tcols;
  for (int v : shared) {
    fcols.push_back(filter.cols[std::find(filter.vars.begin(), filter.vars.end(), v) - filter.vars.begin()]);
    tcols.push_back(target.cols[std::find(target.vars.begin(), target.vars.end(), v) - target.vars.begin()]);
  }
  TupleSet keys(shared.size());
  std::vector<ValueId> key(shared.size());
  for (std::uint32_t r : filter.alive) {
    const ValueId* row = filter.src->row(r);
    for (std::size_t i = 0; i < fcols.size(); ++i) key[i] = row[fcols[i]];
    keys.insert(key.data());
  }
  std::size_t kept = 0;
  for (std::uint32_t r : target.alive) {
    const ValueId* row = target.src->row(r);
    for (std::size_t i = 0; i < tcols.size(); ++i) key[i] = row[tcols[i]];
    if (keys.contains(key.data())) target.alive[kept++] = r;
  }
  target.alive.resize(kept);
}

// Alive rows projected onto `keep`, duplicate-free.
VarTable project_node(const Node& n, const std::vector<int>& keep) {
  std::vector<std::size_t> cols;
  for (int v : keep) cols.push_back(n.cols[std::find(n.vars.begin(), n.vars.end(), v) - n.vars.begin()]);
  // Source rows are distinct, so keeping every variable needs no check.
  bool dedupe = !covers(keep, n.vars);
  TupleSet seen(dedupe ? keep.size() : 0);
  VarTable out{keep, {}, 0};
  out.data.reserve(n.alive.size() * keep.size());
  std::vector<ValueId> buf(keep.size());
  for (std::uint32_t r : n.alive) {
    const ValueId* row = n.src->row(r);
    for (std::size_t i = 0; i < cols.size(); ++i) buf[i] = row[cols[i]];
    if (!dedupe || seen.insert(buf.data()).second) out.append(buf.data());
    if (keep.empty()) break;
  }
  return out;
}

// Yannakakis: full semi-join reduction on a join tree, then bottom-up joins
// projected onto parent-shared and output variables. A child is joined only
// when its subtree brings output variables the parent lacks; after the
// reduction every surviving row has a partner in the others. The result is
// duplicate-free.
VarTable yannakakis(const std::vector<JoinAtom>& atoms, const ConjunctiveQuery& shape,
                    const std::vector<int>& out_vars) {
  std::optional<JoinTree> tree = gyo_join_tree(shape);
  if (!tree) throw Error(ErrorCode::kNotAcyclic, "query " + shape.name + " has no join tree");
  RootedJoinTree rooted = RootedJoinTree::make(*tree, 0);
  std::size_t n = atoms.size();
  VarTable empty{out_vars, {}, 0};

  std::vector<Node> nodes;
  nodes.reserve(n);
  for (const JoinAtom& a : atoms) {
    nodes.push_back(make_node(a));
    if (nodes.back().alive.empty()) return empty;
  }
  for (std::size_t v : rooted.post_order) {
    if (rooted.parent[v] != kNoParent) semijoin(nodes[rooted.parent[v]], nodes[v]);
  }
  if (nodes[rooted.root].alive.empty()) return empty;
  for (auto it = rooted.post_order.rbegin(); it != rooted.post_order.rend(); ++it) {
    for (std::size_t c : rooted.children[*it]) semijoin(nodes[c], nodes[*it]);
  }

  auto contains = [](const std::vector<int>& xs, int x) { return std::find(xs.begin(), xs.end(), x) != xs.end(); };
  std::vector<std::vector<int>> subtree_out(n);
  for (std::size_t v : rooted.post_order) {
    for (int x : nodes[v].vars) {
      if (contains(out_vars, x)) subtree_out[v].push_back(x);
    }
    for (std::size_t c : rooted.children[v]) {
      for (int x : subtree_out[c]) {
        if (!contains(subtree_out[v], x)) subtree_out[v].push_back(x);
      }
    }
  }
  auto brings_new = [&](std::size_t c, std::size_t parent) {
    return std::any_of(subtree_out[c].begin(), subtree_out[c].end(),
                       [&](int x) { return !contains(nodes[parent].vars, x); });
  };

  std::vector<VarTable> up(n);
  for (std::size_t v : rooted.post_order) {
    bool is_root = v == rooted.root;
    if (!is_root && !brings_new(v, rooted.parent[v])) continue;
    std::vector<std::size_t> needed;
    for (std::size_t c : rooted.children[v]) {
      if (brings_new(c, v)) needed.push_back(c);
    }
    std::vector<int> target;
    if (!is_root) target = intersect(nodes[v].vars, nodes[rooted.parent[v]].vars);
    for (int x : subtree_out[v]) {
      if (!contains(target, x)) target.push_back(x);
    }
    if (is_root) target = out_vars;
    // Columns of v to carry: the target's own columns plus links to needed children.
    std::vector<int> keep;
    for (int x : target) {
      if (contains(nodes[v].vars, x)) keep.push_back(x);
    }
    for (std::size_t c : needed) {
      for (int x : intersect(nodes[v].vars, nodes[c].vars)) {
        if (!contains(keep, x)) keep.push_back(x);
      }
    }
    VarTable acc = project_node(nodes[v], keep);
    for (std::size_t c : needed) {
      std::vector<int> vars = acc.vars;
      for (int x : up[c].vars) {
        if (!contains(vars, x)) vars.push_back(x);
      }
      acc = join_project(acc, up[c], vars);
      up[c] = VarTable{};
    }
    up[v] = project(acc, target);
  }
  return std::move(up[rooted.root]);
}

ConjunctiveQuery shape_of(const std::vector<Atom>& atoms, const std::string& name) {
  ConjunctiveQuery q;
  q.name = name;
  q.body = atoms;
  return q;
}

Atom literal_atom(const Literal& l) {
  Atom a;
  a.relation = l.predicate;
  a.terms = l.args;
  return a;
}

// `expand`, when given, maps each output column to a stored column.
AnswerSet decode(const TupleSet& rows, const std::vector<std::string>& columns, const ConstantPool& pool,
                 const std::vector<std::size_t>* expand = nullptr) {
  std::vector<std::size_t> identity(rows.arity());
  std::iota(identity.begin(), identity.end(), 0);
  const std::vector<std::size_t>& cols = expand != nullptr ? *expand : identity;
  if (cols.empty()) return AnswerSet::boolean(rows.size() > 0);
  std::vector<std::string> cells;
  cells.reserve(rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const ValueId* row = rows.row(r);
    for (std::size_t c : cols) cells.push_back(pool.name(row[c]));
  }
  return AnswerSet::from_distinct_rows(columns, cols.size(), rows.size(), std::move(cells));
}

// ---------------------------------------------------------------------------
// Program evaluation

class ProgramEvaluator {
 public:
  ProgramEvaluator(const RewriteProgram& p, const DatabaseInstance& db)
      : program_(p), db_(db), pool_(db.dictionary()) {
    for (const auto& stratum : p.strata) {
      for (const RewriteRule& r : stratum) defined_.insert(r.head);
    }
    find_dead_rules();
    build_layouts();
    find_key_projections();
    for (const auto& stratum : p.strata) {
      for (const RewriteRule& r : stratum) {
        if (dead_.count(&r) == 0) normalized_.emplace(&r, normalize(r));
      }
    }
  }

  /// With `goal_only`, rules whose head the goal never reads are skipped.
  void run(bool goal_only = false) {
    std::set<std::string> needed = goal_only ? needed_for_goal() : defined_;
    for (const auto& stratum : program_.strata) {
      for (const RewriteRule& r : stratum) {
        if (needed.count(r.head) == 0) continue;
        if (goal_only && r.head != program_.goal && key_projections_.count(r.head) > 0) continue;
        auto it = idb_.find(r.head);
        if (it == idb_.end()) it = idb_.emplace(r.head, TupleSet(stored_arity(r.head, r.head_args.size()))).first;
        if (dead_.count(&r) == 0) eval_rule(normalized_.at(&r), it->second);
      }
    }
  }

  const TupleSet& content(const std::string& pred) {
    auto it = idb_.find(pred);
    if (it == idb_.end()) throw Error(ErrorCode::kUnboundPredicate, "predicate " + pred + " has no rules");
    return it->second;
  }

  const std::map<std::string, TupleSet>& all() const { return idb_; }
  /// Stored column of every head position, or null when nothing was dropped.
  const std::vector<std::size_t>* expansion(const std::string& pred) const {
    auto it = layouts_.find(pred);
    return it == layouts_.end() ? nullptr : &it->second.expand;
  }
  const ConstantPool& pool() const { return pool_; }

 private:
  struct View {
    const TupleSet* rows = nullptr;
    TupleSet owned;
    std::vector<std::size_t> positions;  // source position of each column
  };

  const TupleSet& source(const std::string& pred) {
    if (defined_.count(pred) > 0) {
      auto it = idb_.find(pred);
      if (it == idb_.end()) {
        auto kp = key_projections_.find(pred);
        if (kp != key_projections_.end()) return kp->second->block_keys();
      }
      if (it == idb_.end()) throw Error(ErrorCode::kUnboundPredicate, pred + " used before its stratum");
      return it->second;
    }
    const Relation* rel = db_.find(pred);
    if (rel == nullptr) throw Error(ErrorCode::kUnboundPredicate, "no relation or rule for " + pred);
    return rel->rows();
  }

  using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

  // Predicates whose only rule is P(k) :- R(...) with distinct variables,
  // k being R's key: P is the block-key set of R and is not materialized
  // when only the goal is wanted.
  void find_key_projections() {
    std::map<std::string, int> rules;
    for (const auto& stratum : program_.strata) {
      for (const RewriteRule& r : stratum) ++rules[r.head];
    }
    for (const auto& stratum : program_.strata) {
      for (const RewriteRule& r : stratum) {
        if (rules[r.head] != 1 || dead_.count(&r) > 0 || r.body.size() != 1) continue;
        const Literal& l = r.body[0];
        if (l.kind != Literal::Kind::kPositive || defined_.count(l.predicate) > 0) continue;
        const Relation* rel = db_.find(l.predicate);
        if (rel == nullptr || rel->arity() != l.args.size()) continue;
        std::set<std::string> names;
        bool distinct = std::all_of(l.args.begin(), l.args.end(),
                                    [&](const Term& t) { return t.is_variable() && names.insert(t.text).second; });
        const std::vector<std::size_t>& key = rel->schema().key_positions;
        if (!distinct || r.head_args.size() != key.size()) continue;
        bool is_key = true;
        for (std::size_t i = 0; i < key.size(); ++i) is_key = is_key && r.head_args[i] == l.args[key[i]];
        if (is_key) key_projections_.emplace(r.head, rel);
      }
    }
  }

  // A rule is dead when its body cannot be satisfied on any instance: a
  // disequality between terms that the body forces equal (through a derived
  // predicate whose every live rule repeats a term across two head
  // positions), or a positive literal over a predicate with no live rule.
  void find_dead_rules() {
    std::map<std::string, bool> live;
    for (const auto& stratum : program_.strata) {
      // Facts about this stratum's heads apply from the next stratum on.
      std::map<std::string, Pairs> local;
      std::map<std::string, bool> local_live;
      for (const RewriteRule& r : stratum) {
        std::optional<std::vector<Term>> head = live_head(r, live);
        local_live[r.head] = local_live[r.head] || head.has_value();
        if (!head) {
          dead_.insert(&r);
          continue;
        }
        Pairs same;
        for (std::size_t i = 0; i < head->size(); ++i) {
          for (std::size_t j = i + 1; j < head->size(); ++j) {
            if ((*head)[i] == (*head)[j]) same.emplace_back(i, j);
          }
        }
        merge_pairs(local, r.head, std::move(same));
      }
      for (auto& [pred, pairs] : local) merge_pairs(forced_, pred, std::move(pairs));
      for (auto [pred, alive] : local_live) live[pred] = live[pred] || alive;
    }
  }

  static void merge_pairs(std::map<std::string, Pairs>& into, const std::string& pred, Pairs pairs) {
    auto it = into.find(pred);
    if (it == into.end()) {
      into.emplace(pred, std::move(pairs));
      return;
    }
    Pairs both;
    std::set_intersection(it->second.begin(), it->second.end(), pairs.begin(), pairs.end(), std::back_inserter(both));
    it->second = std::move(both);
  }

  // Terms each term is forced equal to by the positive literals over
  // derived predicates with repeated head positions.
  class Unifier {
   public:
    Term find(const Term& t) {
      auto it = parent_.find(t);
      if (it == parent_.end() || it->second == t) return t;
      Term root = find(it->second);
      parent_[t] = root;
      return root;
    }
    // False when two distinct constants meet.
    bool unite(const Term& a, const Term& b) {
      Term ra = find(a);
      Term rb = find(b);
      if (ra == rb) return true;
      if (ra.is_constant() && rb.is_constant()) return false;
      // Constants stay roots.
      if (ra.is_constant()) std::swap(ra, rb);
      parent_[ra] = rb;
      return true;
    }

   private:
    std::map<Term, Term> parent_;
  };

  bool unify_body(const RewriteRule& r, Unifier& u) const {
    bool ok = true;
    for (const Literal& l : r.body) {
      auto fp = forced_.find(l.predicate);
      if (l.kind != Literal::Kind::kPositive || fp == forced_.end()) continue;
      for (auto [i, j] : fp->second) ok = u.unite(l.args[i], l.args[j]) && ok;
    }
    return ok;
  }

  // Head after unification, or nothing when the rule is dead.
  std::optional<std::vector<Term>> live_head(const RewriteRule& r, const std::map<std::string, bool>& live) const {
    for (const Literal& l : r.body) {
      auto lv = live.find(l.predicate);
      if (l.kind == Literal::Kind::kPositive && lv != live.end() && !lv->second) return std::nullopt;
    }
    Unifier u;
    if (!unify_body(r, u)) return std::nullopt;
    for (const Literal& l : r.body) {
      if (l.kind == Literal::Kind::kNotEqual && u.find(l.args[0]) == u.find(l.args[1])) return std::nullopt;
    }
    std::vector<Term> head = r.head_args;
    for (Term& t : head) t = u.find(t);
    return head;
  }

  // A derived predicate whose every rule repeats a term across head
  // positions i and j is stored with only the first of them.
  struct Layout {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> expand;
  };

  void build_layouts() {
    std::map<std::string, std::size_t> arity;
    for (const auto& stratum : program_.strata) {
      for (const RewriteRule& r : stratum) arity[r.head] = r.head_args.size();
    }
    for (const auto& [pred, pairs] : forced_) {
      if (pairs.empty()) continue;
      // Equal positions form cliques, so the smallest partner is the class.
      std::vector<std::size_t> rep(arity.at(pred));
      std::iota(rep.begin(), rep.end(), 0);
      for (auto [i, j] : pairs) rep[j] = std::min(rep[j], i);
      Layout l;
      std::vector<std::size_t> slot(rep.size(), 0);
      for (std::size_t p = 0; p < rep.size(); ++p) {
        if (rep[p] == p) {
          slot[p] = l.kept.size();
          l.kept.push_back(p);
        }
        l.expand.push_back(slot[rep[p]]);
      }
      layouts_.emplace(pred, std::move(l));
    }
  }

  std::size_t stored_arity(const std::string& pred, std::size_t arity) const {
    auto it = layouts_.find(pred);
    return it == layouts_.end() ? arity : it->second.kept.size();
  }

  // Unifies the terms a compact literal forces equal, then drops the
  // repeated columns from compact positive literals and the head. Negative
  // literals keep all arguments; eval_generic handles them.
  RewriteRule normalize(const RewriteRule& rule) const {
    Unifier u;
    unify_body(rule, u);
    auto subst = [&](std::vector<Term>& terms) {
      for (Term& t : terms) t = u.find(t);
    };
    auto compact = [&](const std::string& pred, std::vector<Term>& terms) {
      auto it = layouts_.find(pred);
      if (it == layouts_.end()) return;
      std::vector<Term> kept;
      for (std::size_t p : it->second.kept) kept.push_back(terms[p]);
      terms = std::move(kept);
    };
    RewriteRule n = rule;
    subst(n.head_args);
    compact(n.head, n.head_args);
    for (Literal& l : n.body) {
      subst(l.args);
      if (l.kind == Literal::Kind::kPositive) compact(l.predicate, l.args);
    }
    return n;
  }

  // Derived predicates reachable from the goal through live rules.
  std::set<std::string> needed_for_goal() const {
    std::set<std::string> needed{program_.goal};
    for (auto s = program_.strata.rbegin(); s != program_.strata.rend(); ++s) {
      for (const RewriteRule& r : *s) {
        if (needed.count(r.head) == 0 || dead_.count(&r) > 0) continue;
        for (const Literal& l : r.body) {
          if (l.kind != Literal::Kind::kNotEqual) needed.insert(l.predicate);
        }
      }
    }
    return needed;
  }

  // Filtered/projected view of a positive literal, keeping `keep` variables.
  View* view(const std::string& pred, const std::vector<Slot>& slots, const std::vector<int>& keep,
             const std::vector<bool>* row_filter) {
    const TupleSet& src = source(pred);
    if (src.arity() != slots.size()) {
      throw Error(ErrorCode::kUnboundPredicate, pred + " used with arity " + std::to_string(slots.size()));
    }
    // Canonical signature: variables renumbered by first occurrence.
    std::string sig = pred + "|";
    std::map<int, int> canon;
    bool identity = row_filter == nullptr && keep.size() == slots.size();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const Slot& s = slots[i];
      if (!s.is_var) {
        sig += "c" + std::to_string(s.constant) + ",";
        identity = false;
        continue;
      }
      auto [it, inserted] = canon.emplace(s.var, static_cast<int>(canon.size()));
      bool kept = std::find(keep.begin(), keep.end(), s.var) != keep.end();
      sig += "v" + std::to_string(it->second) + (kept ? "k" : "") + ",";
      if (!inserted || !kept || keep[i] != s.var) identity = false;
    }
    std::vector<std::size_t> positions;
    for (int v : keep) {
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].is_var && slots[i].var == v) {
          positions.push_back(i);
          break;
        }
      }
    }
    if (row_filter == nullptr) {
      auto it = views_.find(sig);
      if (it != views_.end()) return it->second.get();
    }
    auto v = std::make_unique<View>();
    v->positions = positions;
    if (identity) {
      v->rows = &src;
    } else {
      v->owned = select_project(src, slots, keep, row_filter);
      v->rows = &v->owned;
    }
    View* raw = v.get();
    if (row_filter == nullptr) {
      views_.emplace(sig, std::move(v));
    } else {
      scratch_views_.push_back(std::move(v));
    }
    return raw;
  }

  const Grouping* index(View* v, const std::vector<std::size_t>& cols) {
    auto key = std::make_pair(v, cols);
    auto it = indexes_.find(key);
    if (it != indexes_.end()) return it->second.get();
    auto g = std::make_unique<Grouping>(Grouping::build(*v->rows, cols));
    const Grouping* raw = g.get();
    indexes_.emplace(key, std::move(g));
    return raw;
  }

  // Blocks of `relation` whose values at `position` are not all equal.
  const std::vector<bool>& nonuniform_blocks(const Relation& rel, std::size_t position) {
    auto key = std::make_pair(rel.schema().name, position);
    auto it = nonuniform_.find(key);
    if (it != nonuniform_.end()) return it->second;
    std::vector<bool> flag(rel.block_count(), false);
    for (std::size_t r = 0; r < rel.size(); ++r) {
      std::uint32_t b = rel.block_of(r);
      if (rel.row(r)[position] != rel.row(rel.block_first_row(b))[position]) flag[b] = true;
    }
    return nonuniform_.emplace(key, std::move(flag)).first->second;
  }

  void eval_rule(const RewriteRule& rule, TupleSet& out) {
    if (rule.provenance == Provenance::kGround || rule.provenance == Provenance::kGroundStar) {
      eval_ground(rule, out);
      return;
    }
    std::vector<Literal> body = rule.body;
    const std::vector<bool>* first_filter = nullptr;
    std::vector<bool> row_filter;
    if (rule.provenance == Provenance::kRule2 && body.size() >= 3 &&
        body[0].kind == Literal::Kind::kPositive && body[1].kind == Literal::Kind::kPositive &&
        body[0].predicate == body[1].predicate && defined_.count(body[0].predicate) == 0) {
      // Block scan instead of the self-join: keep rows of blocks that are
      // not uniform at the compared position.
      const Relation& rel = db_.at(body[0].predicate);
      auto diseq = std::find_if(body.begin(), body.end(),
                                [](const Literal& l) { return l.kind == Literal::Kind::kNotEqual; });
      std::size_t pos = 0;
      for (std::size_t i = 0; i < body[1].args.size(); ++i) {
        if (body[1].args[i] == diseq->args[0]) pos = i;
      }
      const std::vector<bool>& flags = nonuniform_blocks(rel, pos);
      row_filter.resize(rel.size());
      for (std::size_t r = 0; r < rel.size(); ++r) row_filter[r] = flags[rel.block_of(r)];
      first_filter = &row_filter;
      body.erase(diseq);
      body.erase(body.begin() + 1);
    }
    eval_generic(rule, body, first_filter, out);
  }

  void eval_ground(const RewriteRule& rule, TupleSet& out) {
    std::map<std::string, int> vars;
    std::vector<JoinAtom> atoms;
    std::vector<Atom> shape;
    for (const Literal& l : rule.body) {
      atoms.push_back({&source(l.predicate), compile_terms(l.args, vars, pool_)});
      shape.push_back(literal_atom(l));
    }
    std::vector<Slot> head = compile_terms(rule.head_args, vars, pool_);
    std::vector<int> out_vars = distinct_vars(head);
    VarTable t = yannakakis(atoms, shape_of(shape, rule.head), out_vars);
    std::vector<ValueId> buf(head.size());
    std::vector<std::size_t> cols;
    for (const Slot& s : head) {
      cols.push_back(s.is_var ? std::find(out_vars.begin(), out_vars.end(), s.var) - out_vars.begin() : 0);
    }
    out.reserve(out.size() + t.rows);
    for (std::size_t r = 0; r < t.rows; ++r) {
      const ValueId* row = t.row(r);
      for (std::size_t i = 0; i < head.size(); ++i) buf[i] = head[i].is_var ? row[cols[i]] : head[i].constant;
      out.insert(buf.data());
    }
  }

  // One step of a rule's nested loop.
  struct Op {
    enum What { kConst, kBind, kCheck };
    std::size_t pos;
    What what;
    int var;
    ValueId constant;
  };
  struct Level {
    // Base relation read in place: whole (level 0) or one block per probe.
    const Relation* rel = nullptr;
    const std::vector<bool>* filter = nullptr;
    bool by_block = false;
    std::vector<Slot> key;
    std::vector<Op> ops;
    // Otherwise a projected view, probed through a grouping.
    View* view = nullptr;
    const Grouping* index = nullptr;
    std::vector<int> col_vars;
    std::vector<int> probe_vars;
    std::vector<std::size_t> new_cols;
  };

  struct Check {
    bool negation = false;
    const TupleSet* target = nullptr;
    std::vector<Slot> args;
    // Compact target: the literal can only match when each pair is equal.
    std::vector<std::pair<Slot, Slot>> guards;
  };

  // Rules over one base relation: every term is a constant or a column of
  // the scanned row, so checks and the head read the row directly.
  void scan_one(const Level& lv, const std::vector<Check>& checks, const std::vector<Slot>& head, TupleSet& out) {
    std::vector<std::size_t> col;  // bound variable -> row position
    for (const Op& op : lv.ops) {
      if (op.what != Op::kBind) continue;
      if (col.size() <= static_cast<std::size_t>(op.var)) col.resize(op.var + 1);
      col[op.var] = op.pos;
    }
    // Position in the row, or npos with the constant.
    struct Src {
      std::size_t pos;
      ValueId constant;
    };
    auto src = [&](const Slot& s) { return s.is_var ? Src{col[s.var], 0} : Src{TupleSet::npos, s.constant}; };
    struct Test {
      const TupleSet* target;  // null for a disequality
      std::vector<Src> args;
      std::vector<std::pair<Src, Src>> guards;
    };
    std::vector<Test> tests;
    for (const Check& c : checks) {
      Test t{c.negation ? c.target : nullptr, {}, {}};
      for (const Slot& a : c.args) t.args.push_back(src(a));
      for (const auto& [a, b] : c.guards) t.guards.emplace_back(src(a), src(b));
      tests.push_back(std::move(t));
    }
    std::vector<Src> out_src;
    for (const Slot& h : head) out_src.push_back(src(h));
    std::vector<std::pair<std::size_t, ValueId>> consts;
    std::vector<std::pair<std::size_t, std::size_t>> equal;
    for (const Op& op : lv.ops) {
      if (op.what == Op::kConst) consts.emplace_back(op.pos, op.constant);
      if (op.what == Op::kCheck) equal.emplace_back(op.pos, col[op.var]);
    }

    const Relation& rel = *lv.rel;
    std::vector<ValueId> probe;
    std::vector<ValueId> buf(head.size());
    // At most one head tuple per row.
    out.reserve(out.size() + rel.size());
    for (std::size_t r = 0; r < rel.size(); ++r) {
      if (lv.filter != nullptr && !(*lv.filter)[r]) continue;
      const ValueId* row = rel.row(r);
      auto get = [row](const Src& x) { return x.pos == TupleSet::npos ? x.constant : row[x.pos]; };
      bool ok = true;
      for (const auto& [p, c] : consts) ok = ok && row[p] == c;
      for (const auto& [a, b] : equal) ok = ok && row[a] == row[b];
      for (std::size_t k = 0; ok && k < tests.size(); ++k) {
        const Test& t = tests[k];
        if (t.target == nullptr) {
          ok = get(t.args[0]) != get(t.args[1]);
          continue;
        }
        bool apart = false;
        for (const auto& [a, b] : t.guards) apart = apart || get(a) != get(b);
        if (apart) continue;
        probe.resize(t.args.size());
        for (std::size_t i = 0; i < t.args.size(); ++i) probe[i] = get(t.args[i]);
        ok = !t.target->contains(probe.data());
      }
      if (!ok) continue;
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = get(out_src[i]);
      out.insert(buf.data());
    }
  }

  void eval_generic(const RewriteRule& rule, const std::vector<Literal>& body,
                    const std::vector<bool>* first_filter, TupleSet& out) {
    std::map<std::string, int> vars;
    std::vector<std::vector<Slot>> pos_slots;
    std::vector<const Literal*> positives;
    for (const Literal& l : body) {
      if (l.kind != Literal::Kind::kPositive) continue;
      positives.push_back(&l);
      pos_slots.push_back(compile_terms(l.args, vars, pool_));
    }
    if (positives.empty()) throw Error(ErrorCode::kUnboundPredicate, "rule without positive literal");
    std::vector<Slot> head = compile_terms(rule.head_args, vars, pool_);
    std::vector<Check> checks;
    for (const Literal& l : body) {
      if (l.kind == Literal::Kind::kPositive) continue;
      Check c;
      c.negation = l.kind == Literal::Kind::kNegative;
      c.args = compile_terms(l.args, vars, pool_);
      if (c.negation) {
        if (auto lay = layouts_.find(l.predicate); lay != layouts_.end() && c.args.size() == lay->second.expand.size()) {
          std::vector<Slot> kept;
          for (std::size_t p : lay->second.kept) kept.push_back(c.args[p]);
          for (std::size_t p = 0; p < c.args.size(); ++p) {
            std::size_t q = lay->second.kept[lay->second.expand[p]];
            if (q != p) c.guards.emplace_back(c.args[q], c.args[p]);
          }
          c.args = std::move(kept);
        }
        c.target = &source(l.predicate);
        if (c.target->arity() != c.args.size()) {
          throw Error(ErrorCode::kUnboundPredicate, l.predicate + " negated with wrong arity");
        }
      }
      checks.push_back(std::move(c));
    }
    std::size_t nvars = vars.size();

    // Variables needed outside their own literal.
    std::vector<int> uses(nvars, 0);
    auto count_uses = [&](const std::vector<Slot>& slots) {
      for (int v : distinct_vars(slots)) ++uses[v];
    };
    for (const auto& s : pos_slots) count_uses(s);
    count_uses(head);
    for (const Check& c : checks) {
      count_uses(c.args);
      for (const auto& [a, b] : c.guards) count_uses({a, b});
    }

    std::size_t m = positives.size();
    // A smaller derived literal that binds the key of a leading base
    // literal goes first, so the base literal is read block by block.
    if (first_filter == nullptr && m >= 2 && defined_.count(positives[0]->predicate) == 0) {
      const Relation& rel = db_.at(positives[0]->predicate);
      for (std::size_t j = 1; j < m; ++j) {
        std::vector<int> vs = distinct_vars(pos_slots[j]);
        bool binds_key = std::all_of(rel.schema().key_positions.begin(), rel.schema().key_positions.end(), [&](std::size_t p) {
          const Slot& s = pos_slots[0][p];
          return !s.is_var || std::find(vs.begin(), vs.end(), s.var) != vs.end();
        });
        if (binds_key && defined_.count(positives[j]->predicate) > 0 && source(positives[j]->predicate).size() < rel.size()) {
          std::rotate(positives.begin(), positives.begin() + j, positives.begin() + j + 1);
          std::rotate(pos_slots.begin(), pos_slots.begin() + j, pos_slots.begin() + j + 1);
          break;
        }
      }
    }

    std::vector<bool> bound(nvars, false);
    std::vector<Level> levels(m);
    std::vector<std::vector<std::size_t>> checks_at(m);
    std::vector<bool> placed(checks.size(), false);
    for (std::size_t i = 0; i < m; ++i) {
      Level& lv = levels[i];
      const std::vector<Slot>& slots = pos_slots[i];
      const Relation* rel = defined_.count(positives[i]->predicate) == 0 ? db_.find(positives[i]->predicate) : nullptr;
      if (rel != nullptr && rel->arity() == slots.size()) {
        bool key_bound = i > 0 && std::all_of(rel->schema().key_positions.begin(), rel->schema().key_positions.end(),
                                              [&](std::size_t p) { return !slots[p].is_var || bound[slots[p].var]; });
        if (i == 0 || key_bound) {
          lv.rel = rel;
          lv.filter = i == 0 ? first_filter : nullptr;
          lv.by_block = i > 0;
          if (lv.by_block) {
            for (std::size_t p : rel->schema().key_positions) lv.key.push_back(slots[p]);
          }
          std::vector<int> seen(nvars, 0);
          for (const Slot& s : slots) {
            if (s.is_var) ++seen[s.var];
          }
          for (std::size_t p = 0; p < slots.size(); ++p) {
            if (lv.by_block && std::find(rel->schema().key_positions.begin(), rel->schema().key_positions.end(), p) !=
                                   rel->schema().key_positions.end()) {
              continue;
            }
            const Slot& s = slots[p];
            if (!s.is_var) {
              lv.ops.push_back({p, Op::kConst, 0, s.constant});
            } else if (bound[s.var]) {
              lv.ops.push_back({p, Op::kCheck, s.var, 0});
            } else if (uses[s.var] > 1 || seen[s.var] > 1) {
              lv.ops.push_back({p, Op::kBind, s.var, 0});
              bound[s.var] = true;
            }
          }
        }
      }
      if (lv.rel == nullptr) {
        for (int v : distinct_vars(slots)) {
          if (uses[v] > 1) lv.col_vars.push_back(v);
        }
        lv.view = view(positives[i]->predicate, slots, lv.col_vars, i == 0 ? first_filter : nullptr);
        std::vector<std::size_t> probe_cols;
        for (std::size_t c = 0; c < lv.col_vars.size(); ++c) {
          int v = lv.col_vars[c];
          if (bound[v]) {
            probe_cols.push_back(c);
            lv.probe_vars.push_back(v);
          } else {
            lv.new_cols.push_back(c);
          }
        }
        for (std::size_t c : lv.new_cols) bound[lv.col_vars[c]] = true;
        if (i > 0) lv.index = index(lv.view, probe_cols);
      }
      for (std::size_t k = 0; k < checks.size(); ++k) {
        if (placed[k]) continue;
        auto is_bound = [&](const Slot& s) { return !s.is_var || bound[s.var]; };
        bool ready = std::all_of(checks[k].args.begin(), checks[k].args.end(), is_bound) &&
                     std::all_of(checks[k].guards.begin(), checks[k].guards.end(),
                                 [&](const auto& g) { return is_bound(g.first) && is_bound(g.second); });
        if (ready) {
          checks_at[i].push_back(k);
          placed[k] = true;
        }
      }
    }
    for (std::size_t k = 0; k < checks.size(); ++k) {
      if (!placed[k]) throw Error(ErrorCode::kUnboundPredicate, "unsafe rule for " + rule.head);
    }

    if (m == 1 && levels[0].rel != nullptr) {
      scan_one(levels[0], checks, head, out);
      return;
    }

    std::vector<ValueId> val(nvars, 0);
    std::vector<ValueId> probe;
    std::vector<ValueId> head_buf(head.size());
    auto resolve = [&](const Slot& s) { return s.is_var ? val[s.var] : s.constant; };
    auto pass = [&](std::size_t level) {
      for (std::size_t k : checks_at[level]) {
        const Check& c = checks[k];
        if (!c.negation) {
          if (resolve(c.args[0]) == resolve(c.args[1])) return false;
          continue;
        }
        bool apart = std::any_of(c.guards.begin(), c.guards.end(),
                                 [&](const auto& g) { return resolve(g.first) != resolve(g.second); });
        if (apart) continue;
        probe.resize(c.args.size());
        for (std::size_t i = 0; i < c.args.size(); ++i) probe[i] = resolve(c.args[i]);
        if (c.target->contains(probe.data())) return false;
      }
      return true;
    };

    std::vector<std::vector<ValueId>> keys(m);
    for (std::size_t i = 0; i < m; ++i) keys[i].resize(levels[i].rel ? levels[i].key.size() : levels[i].probe_vars.size());
    std::function<void(std::size_t)> descend;
    auto next = [&](std::size_t level) {
      if (level + 1 < m) {
        descend(level + 1);
        return;
      }
      for (std::size_t i = 0; i < head.size(); ++i) head_buf[i] = resolve(head[i]);
      out.insert(head_buf.data());
    };
    descend = [&](std::size_t level) {
      const Level& lv = levels[level];
      std::vector<ValueId>& k = keys[level];
      if (lv.rel != nullptr) {
        auto visit = [&](std::size_t r) {
          const ValueId* row = lv.rel->row(r);
          for (const Op& op : lv.ops) {
            switch (op.what) {
              case Op::kConst:
                if (row[op.pos] != op.constant) return;
                break;
              case Op::kCheck:
                if (row[op.pos] != val[op.var]) return;
                break;
              case Op::kBind:
                val[op.var] = row[op.pos];
                break;
            }
          }
          if (pass(level)) next(level);
        };
        if (!lv.by_block) {
          for (std::size_t r = 0; r < lv.rel->size(); ++r) {
            if (lv.filter == nullptr || (*lv.filter)[r]) visit(r);
          }
          return;
        }
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = resolve(lv.key[i]);
        std::size_t b = lv.rel->block_keys().find(k.data());
        if (b == TupleSet::npos) return;
        for (std::uint32_t r = lv.rel->block_first_row(b); r != Relation::kNoRow; r = lv.rel->next_in_block(r)) visit(r);
        return;
      }
      const TupleSet& rows = *lv.view->rows;
      auto visit = [&](std::size_t r) {
        const ValueId* row = rows.row(r);
        for (std::size_t c : lv.new_cols) val[lv.col_vars[c]] = row[c];
        if (pass(level)) next(level);
      };
      if (level == 0) {
        for (std::size_t r = 0; r < rows.size(); ++r) visit(r);
        return;
      }
      for (std::size_t i = 0; i < k.size(); ++i) k[i] = val[lv.probe_vars[i]];
      std::size_t grp = lv.index->group_of(k.data());
      if (grp == TupleSet::npos) return;
      for (std::uint32_t x = lv.index->offsets[grp]; x < lv.index->offsets[grp + 1]; ++x) visit(lv.index->rows[x]);
    };
    descend(0);
  }

  const RewriteProgram& program_;
  const DatabaseInstance& db_;
  ConstantPool pool_;
  std::set<std::string> defined_;
  std::set<const RewriteRule*> dead_;
  std::map<std::string, Pairs> forced_;
  std::map<std::string, Layout> layouts_;
  std::map<std::string, const Relation*> key_projections_;
  std::map<const RewriteRule*, RewriteRule> normalized_;
  std::map<std::string, TupleSet> idb_;
  std::map<std::string, std::unique_ptr<View>> views_;
  std::vector<std::unique_ptr<View>> scratch_views_;
  std::map<std::pair<View*, std::vector<std::size_t>>, std::unique_ptr<Grouping>> indexes_;
  std::map<std::pair<std::string, std::size_t>, std::vector<bool>> nonuniform_;
};

std::vector<std::string> columns_for(const RewriteProgram& p, const std::string& pred) {
  if (pred == p.goal) return p.answer_vars;
  if (const PredicateInfo* info = p.predicate(pred)) return info->columns;
  return {};
}

AnswerSet run_query(const ConjunctiveQuery& q, const DatabaseInstance& db, bool consistent_only) {
  ConstantPool pool(db.dictionary());
  std::map<std::string, int> vars;
  std::vector<JoinAtom> atoms;
  std::vector<std::vector<bool>> filters(q.body.size());
  for (std::size_t i = 0; i < q.body.size(); ++i) {
    const Atom& a = q.body[i];
    const Relation* rel = db.find(a.relation);
    if (rel == nullptr) throw Error(ErrorCode::kUnboundPredicate, "no relation " + a.relation);
    atoms.push_back({&rel->rows(), compile_terms(a.terms, vars, pool)});
    if (consistent_only) {
      filters[i].resize(rel->size());
      for (std::size_t r = 0; r < rel->size(); ++r) filters[i][r] = rel->block_size(rel->block_of(r)) == 1;
      atoms.back().row_filter = &filters[i];
    }
  }
  std::vector<int> out_vars;
  for (const std::string& h : q.head) out_vars.push_back(vars.at(h));
  VarTable t = yannakakis(atoms, q, out_vars);
  TupleSet rows(out_vars.size());
  rows.reserve(t.rows);
  for (std::size_t r = 0; r < t.rows; ++r) rows.insert(t.row(r));
  return decode(rows, q.head, pool);
}

AnswerSet boolean_cqa(const ConjunctiveQuery& q, const DatabaseInstance& db) {
  for (const ConjunctiveQuery& part : connected_components(q)) {
    PpjtCertificate cert = require_ppjt(part);
    if (!eval_program(rewrite_boolean(part, cert), db).truth()) return AnswerSet::boolean(false);
  }
  return AnswerSet::boolean(true);
}

}  // namespace

ProgramResult evaluate(const RewriteProgram& p, const DatabaseInstance& db) {
  ProgramEvaluator ev(p, db);
  ev.run();
  ProgramResult result;
  for (const auto& [name, rows] : ev.all()) {
    result.predicates[name] = decode(rows, columns_for(p, name), ev.pool(), ev.expansion(name));
  }
  result.goal = result.predicates.at(p.goal);
  return result;
}

AnswerSet eval_program(const RewriteProgram& p, const DatabaseInstance& db) {
  ProgramEvaluator ev(p, db);
  ev.run(true);
  return decode(ev.content(p.goal), p.answer_vars, ev.pool(), ev.expansion(p.goal));
}

AnswerSet eval_query(const ConjunctiveQuery& q, const DatabaseInstance& db) {
  return run_query(q, db, false);
}

AnswerSet eval_query_consistent_part(const ConjunctiveQuery& q, const DatabaseInstance& db) {
  return run_query(q, db, true);
}

AnswerSet consistent_answers(const ConjunctiveQuery& q, const DatabaseInstance& db, const CqaOptions& options) {
  if (q.is_boolean()) return boolean_cqa(q, db);
  if (!q.is_connected()) {
    throw Error(ErrorCode::kDisconnectedQuery, "non-Boolean query " + q.name + " is not connected");
  }
  PpjtCertificate cert = require_ppjt(q);
  if (q.is_full() && options.full_fast_path) return eval_query_consistent_part(q, db);
  if (options.strategy == Strategy::kProgram) {
    AnswerSet out = eval_program(rewrite_nonboolean(q, cert, options.ground), db);
    out.columns = q.head;
    return out;
  }
  AnswerSet possible = eval_query(q, db);
  AnswerSet out;
  out.columns = q.head;
  for (const auto& tuple : possible.tuples()) {
    std::map<std::string, std::string> assignment;
    for (std::size_t i = 0; i < q.head.size(); ++i) assignment[q.head[i]] = tuple[i];
    ConjunctiveQuery grounded = substitute(q, assignment);
    if (eval_program(rewrite_boolean(grounded, cert), db).truth()) out.insert(tuple);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repairs and the oracle

std::uint64_t count_repairs(const DatabaseInstance& db, const ConjunctiveQuery* q) {
  std::set<std::string> names;
  if (q != nullptr) {
    for (const Atom& a : q->body) names.insert(a.relation);
  } else {
    for (const auto& [name, rel] : db.relations()) names.insert(name);
  }
  std::uint64_t total = 1;
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  for (const std::string& name : names) {
    const Relation& rel = db.at(name);
    for (std::size_t b = 0; b < rel.block_count(); ++b) {
      std::uint64_t s = rel.block_size(b);
      if (total > kMax / s) return kMax;
      total *= s;
    }
  }
  return total;
}

RepairIterator::RepairIterator(const DatabaseInstance& db, std::vector<std::string> relations)
    : names_(std::move(relations)) {
  if (names_.empty()) {
    for (const auto& [name, rel] : db.relations()) names_.push_back(name);
  }
  for (const std::string& name : names_) {
    Grouping g = db.at(name).blocks();
    std::size_t blocks = g.keys.size();
    cursor_.emplace_back(blocks, 0);
    chosen_.emplace_back(blocks);
    for (std::size_t b = 0; b < blocks; ++b) chosen_.back()[b] = g.rows[g.offsets[b]];
    blocks_.push_back(std::move(g));
  }
}

void RepairIterator::next() {
  for (std::size_t r = names_.size(); r-- > 0;) {
    const Grouping& g = blocks_[r];
    for (std::size_t b = cursor_[r].size(); b-- > 0;) {
      std::uint32_t size = g.offsets[b + 1] - g.offsets[b];
      if (++cursor_[r][b] < size) {
        chosen_[r][b] = g.rows[g.offsets[b] + cursor_[r][b]];
        return;
      }
      cursor_[r][b] = 0;
      chosen_[r][b] = g.rows[g.offsets[b]];
    }
  }
  done_ = true;
}

namespace {

// Backtracking evaluation of q over one repair.
class RepairEvaluator {
 public:
  RepairEvaluator(const ConjunctiveQuery& q, const DatabaseInstance& db, ConstantPool& pool) : q_(q) {
    for (const Atom& a : q.body) {
      slots_.push_back(compile_terms(a.terms, vars_, pool));
      rels_.push_back(&db.at(a.relation));
    }
    for (const std::string& h : q.head) head_.push_back(vars_.at(h));
    values_.assign(vars_.size(), 0);
    bound_.assign(vars_.size(), false);
  }

  void answers(const std::vector<const std::vector<std::uint32_t>*>& chosen,
               std::set<std::vector<ValueId>>& out, bool stop_at_first) {
    chosen_ = &chosen;
    out_ = &out;
    stop_ = stop_at_first;
    found_ = false;
    descend(0);
  }

 private:
  void descend(std::size_t level) {
    if (found_ && stop_) return;
    if (level == slots_.size()) {
      std::vector<ValueId> t;
      for (int v : head_) t.push_back(values_[v]);
      out_->insert(std::move(t));
      found_ = true;
      return;
    }
    const Relation& rel = *rels_[level];
    const std::vector<Slot>& slots = slots_[level];
    for (std::uint32_t r : *(*chosen_)[level]) {
      const ValueId* row = rel.row(r);
      std::vector<int> newly;
      bool ok = true;
      for (std::size_t i = 0; i < slots.size() && ok; ++i) {
        const Slot& s = slots[i];
        if (!s.is_var) {
          ok = row[i] == s.constant;
        } else if (bound_[s.var]) {
          ok = values_[s.var] == row[i];
        } else {
          bound_[s.var] = true;
          values_[s.var] = row[i];
          newly.push_back(s.var);
        }
      }
      if (ok) descend(level + 1);
      for (int v : newly) bound_[v] = false;
      if (found_ && stop_) return;
    }
  }

  const ConjunctiveQuery& q_;
  std::map<std::string, int> vars_;
  std::vector<std::vector<Slot>> slots_;
  std::vector<const Relation*> rels_;
  std::vector<int> head_;
  std::vector<ValueId> values_;
  std::vector<bool> bound_;
  const std::vector<const std::vector<std::uint32_t>*>* chosen_ = nullptr;
  std::set<std::vector<ValueId>>* out_ = nullptr;
  bool stop_ = false;
  bool found_ = false;
};

}  // namespace

AnswerSet oracle_consistent_answers(const ConjunctiveQuery& q, const DatabaseInstance& db) {
  std::uint64_t repairs = count_repairs(db, &q);
  if (repairs > kMaxRepairs) {
    throw Error(ErrorCode::kTooManyRepairs, std::to_string(repairs) + " repairs exceed the oracle guard");
  }
  std::vector<std::string> names;
  for (const Atom& a : q.body) {
    if (std::find(names.begin(), names.end(), a.relation) == names.end()) names.push_back(a.relation);
  }
  std::vector<std::size_t> rel_of_atom;
  for (const Atom& a : q.body) {
    rel_of_atom.push_back(std::find(names.begin(), names.end(), a.relation) - names.begin());
  }
  ConstantPool pool(db.dictionary());
  RepairEvaluator eval(q, db, pool);
  RepairIterator it(db, names);

  std::optional<std::set<std::vector<ValueId>>> certain;
  std::vector<const std::vector<std::uint32_t>*> chosen(q.body.size());
  for (; !it.done(); it.next()) {
    for (std::size_t i = 0; i < q.body.size(); ++i) chosen[i] = &it.chosen(rel_of_atom[i]);
    std::set<std::vector<ValueId>> found;
    eval.answers(chosen, found, q.is_boolean());
    if (!certain) {
      certain = std::move(found);
    } else {
      std::set<std::vector<ValueId>> kept;
      std::set_intersection(certain->begin(), certain->end(), found.begin(), found.end(),
                            std::inserter(kept, kept.begin()));
      certain = std::move(kept);
    }
    if (certain->empty()) break;
  }
  AnswerSet out;
  out.columns = q.head;
  if (certain) {
    for (const auto& t : *certain) {
      std::vector<std::string> s;
      for (ValueId v : t) s.push_back(pool.name(v));
      out.insert(std::move(s));
    }
  }
  return out;
}

std::set<std::vector<std::string>> good_keys(const ConjunctiveQuery& q, const DatabaseInstance& db,
                                             std::size_t atom) {
  if (!q.is_boolean()) throw Error(ErrorCode::kInvalidSpec, "good_keys expects a Boolean query");
  const Atom& a = q.body.at(atom);
  const Relation& rel = db.at(a.relation);
  std::set<std::vector<std::string>> out;
  for (std::size_t b = 0; b < rel.block_count(); ++b) {
    const ValueId* key = rel.block_keys().row(b);
    std::vector<std::string> values;
    std::map<std::string, std::string> assignment;
    bool ok = true;
    for (std::size_t i = 0; i < a.key_positions.size(); ++i) {
      const std::string& value = db.dictionary().value(key[i]);
      values.push_back(value);
      const Term& t = a.terms[a.key_positions[i]];
      if (t.is_constant()) {
        ok = ok && t.text == value;
      } else {
        auto [it, inserted] = assignment.emplace(t.text, value);
        ok = ok && it->second == value;
      }
    }
    if (!ok) continue;
    if (oracle_consistent_answers(substitute(q, assignment), db).truth()) out.insert(values);
  }
  return out;
}

}  // namespace lincqa
