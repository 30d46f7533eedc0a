#include "lincqa/rewriting.hpp"

#include <algorithm>
#include <set>

#include "lincqa/error.hpp"

namespace lincqa {

namespace {

using Rules = std::vector<RewriteRule>;

// Fresh variable names z1, z2, ... that avoid every query variable.
class FreshNames {
 public:
  explicit FreshNames(std::set<std::string> taken) : taken_(std::move(taken)) {}

  void reset() { next_ = 1; }
  std::string next() {
    while (true) {
      std::string name = "z" + std::to_string(next_++);
      if (taken_.count(name) == 0) return name;
    }
  }

 private:
  std::set<std::string> taken_;
  std::size_t next_ = 1;
};

std::vector<Term> key_terms(const Atom& atom) {
  std::vector<Term> out;
  for (std::size_t p : atom.key_positions) out.push_back(atom.terms[p]);
  return out;
}

std::vector<Term> as_terms(const std::vector<std::string>& vars) {
  std::vector<Term> out;
  for (const std::string& v : vars) out.push_back(Term::variable(v));
  return out;
}

// Distinct variables shared by `child` and `parent`, in order of first
// occurrence in `child`.
std::vector<std::string> shared_vars(const Atom& child, const Atom& parent) {
  std::set<std::string> pv = parent.var_set();
  std::vector<std::string> out;
  for (const std::string& v : child.vars()) {
    if (pv.count(v) > 0) out.push_back(v);
  }
  return out;
}

struct Generated {
  // Per atom: fkey rules (R1, R2, R3 in that order) and the exit rule.
  std::vector<Rules> fkey;
  std::vector<RewriteRule> exit;
  std::vector<std::vector<std::string>> join_vars;  // w per atom
};

Generated generate_boolean(const ConjunctiveQuery& q, const RootedJoinTree& tree,
                           const std::set<std::string>& taken) {
  FreshNames fresh(taken);
  std::size_t n = q.body.size();
  Generated g;
  g.fkey.assign(n, {});
  g.exit.assign(n, {});
  g.join_vars.assign(n, {});
  for (std::size_t v = 0; v < n; ++v) {
    if (tree.parent[v] != kNoParent) g.join_vars[v] = shared_vars(q.body[v], q.body[tree.parent[v]]);
  }

  for (std::size_t v : tree.post_order) {
    const Atom& atom = q.body[v];
    const std::string fkey = fkey_name(atom.relation);
    Rules& rules = g.fkey[v];

    // Rule 1: constants and repeated variables.
    for (std::size_t i = 0; i < atom.arity(); ++i) {
      const Term& t = atom.terms[i];
      std::optional<std::size_t> earlier;
      if (t.is_variable()) {
        for (std::size_t j = 0; j < i; ++j) {
          if (atom.terms[j] == t) {
            earlier = j;
            break;
          }
        }
        if (!earlier) continue;
      }
      fresh.reset();
      std::vector<Term> z;
      for (std::size_t k = 0; k < atom.arity(); ++k) z.push_back(Term::variable(fresh.next()));
      RewriteRule r;
      r.provenance = Provenance::kRule1;
      r.head = fkey;
      for (std::size_t p : atom.key_positions) r.head_args.push_back(z[p]);
      r.body.push_back(Literal::positive(atom.relation, z));
      r.body.push_back(Literal::not_equal(z[i], t.is_constant() ? t : z[*earlier]));
      rules.push_back(std::move(r));
    }

    // Rule 2: non-key variables shared with the parent.
    if (tree.parent[v] != kNoParent) {
      std::set<std::string> parent_vars = q.body[tree.parent[v]].var_set();
      std::set<std::string> done;
      for (std::size_t i = 0; i < atom.arity(); ++i) {
        const Term& t = atom.terms[i];
        if (atom.is_key_position(i) || !t.is_variable()) continue;
        if (parent_vars.count(t.text) == 0 || !done.insert(t.text).second) continue;
        fresh.reset();
        std::vector<Term> second = atom.terms;
        Term zi;
        for (std::size_t k = 0; k < atom.arity(); ++k) {
          if (atom.is_key_position(k)) continue;
          second[k] = Term::variable(fresh.next());
          if (k == i) zi = second[k];
        }
        RewriteRule r;
        r.provenance = Provenance::kRule2;
        r.head = fkey;
        r.head_args = key_terms(atom);
        r.body.push_back(Literal::positive(atom.relation, atom.terms));
        r.body.push_back(Literal::positive(atom.relation, second));
        r.body.push_back(Literal::not_equal(zi, t));
        rules.push_back(std::move(r));
      }
    }

    // Rule 3: one per child.
    for (std::size_t c : tree.children[v]) {
      RewriteRule r;
      r.provenance = Provenance::kRule3;
      r.head = fkey;
      r.head_args = key_terms(atom);
      r.body.push_back(Literal::positive(atom.relation, atom.terms));
      r.body.push_back(Literal::negative(join_name(q.body[c].relation), as_terms(g.join_vars[c])));
      rules.push_back(std::move(r));
    }

    // Rule 4: exit rule.
    RewriteRule exit;
    exit.provenance = Provenance::kRule4;
    exit.head = join_name(atom.relation);
    exit.head_args = as_terms(g.join_vars[v]);
    exit.body.push_back(Literal::positive(atom.relation, atom.terms));
    if (!rules.empty()) exit.body.push_back(Literal::negative(fkey, key_terms(atom)));
    g.exit[v] = std::move(exit);
  }
  return g;
}

void check_names(const ConjunctiveQuery& q, bool with_ground) {
  std::set<std::string> relations;
  for (const Atom& a : q.body) relations.insert(a.relation);
  std::set<std::string> generated;
  for (const Atom& a : q.body) {
    generated.insert(fkey_name(a.relation));
    generated.insert(join_name(a.relation));
  }
  if (with_ground) {
    generated.insert(kGroundStarName);
    generated.insert(kGroundName);
  }
  for (const std::string& name : generated) {
    if (relations.count(name) > 0) {
      throw Error(ErrorCode::kSyntaxError, "relation name " + name + " collides with a generated predicate");
    }
  }
}

PredicateInfo fkey_info(const Atom& atom, const std::vector<std::string>& free) {
  PredicateInfo info;
  info.name = fkey_name(atom.relation);
  info.kind = PredicateInfo::Kind::kFkey;
  info.relation = atom.relation;
  for (std::size_t p : atom.key_positions) info.columns.push_back(atom.attributes[p]);
  for (const std::string& u : free) info.columns.push_back("u_" + u);
  info.free_vars = free;
  return info;
}

PredicateInfo join_info(const Atom& atom, const std::vector<std::string>& w,
                        const std::vector<std::string>& free) {
  PredicateInfo info;
  info.name = join_name(atom.relation);
  info.kind = PredicateInfo::Kind::kJoin;
  info.relation = atom.relation;
  for (const std::string& v : w) info.columns.push_back("j_" + v);
  for (const std::string& u : free) info.columns.push_back("u_" + u);
  info.free_vars = free;
  return info;
}

RewriteProgram assemble(const ConjunctiveQuery& q, const RootedJoinTree& tree, Generated g,
                        const std::vector<std::vector<std::string>>& free) {
  RewriteProgram p;
  for (std::size_t v : tree.post_order) {
    const Atom& atom = q.body[v];
    if (!g.fkey[v].empty()) {
      p.strata.push_back(std::move(g.fkey[v]));
      p.predicates.push_back(fkey_info(atom, free[v]));
    }
    p.strata.push_back({std::move(g.exit[v])});
    p.predicates.push_back(join_info(atom, g.join_vars[v], free[v]));
  }
  p.goal = join_name(q.body[tree.root].relation);
  return p;
}

bool term_bound(const Term& t, const std::set<std::string>& bound) {
  return t.is_constant() || bound.count(t.text) > 0;
}

}  // namespace

std::string provenance_tag(Provenance p) {
  switch (p) {
    case Provenance::kRule1: return "R1";
    case Provenance::kRule2: return "R2";
    case Provenance::kRule3: return "R3";
    case Provenance::kRule4: return "R4";
    case Provenance::kGround: return "ground";
    case Provenance::kGroundStar: return "ground*";
  }
  return "?";
}

std::string fkey_name(const std::string& relation) { return "fkey_" + relation; }
std::string join_name(const std::string& relation) { return relation + "_join"; }

const PredicateInfo* RewriteProgram::predicate(const std::string& name) const {
  for (const PredicateInfo& info : predicates) {
    if (info.name == name) return &info;
  }
  return nullptr;
}

std::size_t RewriteProgram::rule_count() const {
  std::size_t n = 0;
  for (const auto& s : strata) n += s.size();
  return n;
}

RewriteProgram rewrite_boolean(const ConjunctiveQuery& q, const PpjtCertificate& cert) {
  if (!q.is_boolean()) throw Error(ErrorCode::kInvalidCertificate, "rewrite_boolean needs a Boolean query");
  if (!verify_certificate(q, cert)) {
    throw Error(ErrorCode::kInvalidCertificate, "certificate does not verify for " + q.name);
  }
  check_names(q, false);
  std::vector<std::string> vars = q.variables();
  Generated g = generate_boolean(q, cert.tree, std::set<std::string>(vars.begin(), vars.end()));
  return assemble(q, cert.tree, std::move(g), std::vector<std::vector<std::string>>(q.body.size()));
}

RewriteProgram rewrite_nonboolean(const ConjunctiveQuery& q, const PpjtCertificate& cert,
                                  GroundMode mode) {
  if (q.is_boolean()) throw Error(ErrorCode::kInvalidCertificate, "rewrite_nonboolean needs free variables");
  if (!q.is_connected()) {
    throw Error(ErrorCode::kDisconnectedQuery, "non-Boolean query " + q.name + " is not connected");
  }
  FrozenQuery frozen = freeze_head(q);
  if (!verify_certificate(frozen.query, cert)) {
    throw Error(ErrorCode::kInvalidCertificate, "certificate does not verify for the frozen " + q.name);
  }
  check_names(q, true);
  const RootedJoinTree& tree = cert.tree;
  std::size_t n = q.body.size();

  std::vector<std::string> vars = q.variables();
  Generated g = generate_boolean(frozen.query, tree, std::set<std::string>(vars.begin(), vars.end()));

  // Frozen constants back to free variables.
  auto unfreeze = [&](std::vector<Term>& terms) {
    for (Term& t : terms) {
      if (!is_frozen_constant(t)) continue;
      t = Term::variable(frozen.constant_to_var.at(t.text));
    }
  };
  auto unfreeze_rule = [&](RewriteRule& r) {
    unfreeze(r.head_args);
    for (Literal& l : r.body) unfreeze(l.args);
  };
  for (Rules& rules : g.fkey) {
    for (RewriteRule& r : rules) unfreeze_rule(r);
  }
  for (RewriteRule& r : g.exit) unfreeze_rule(r);

  // u_T: free variables of the subtree rooted at T, in head order.
  std::vector<std::vector<std::string>> free(n);
  std::map<std::string, std::vector<std::string>> free_of_pred;
  for (std::size_t v = 0; v < n; ++v) {
    std::set<std::string> sub;
    for (std::size_t a : tree.subtree(v)) {
      for (const std::string& x : q.body[a].vars()) sub.insert(x);
    }
    for (const std::string& h : q.head) {
      if (sub.count(h) > 0) free[v].push_back(h);
    }
    free_of_pred[fkey_name(q.body[v].relation)] = free[v];
    free_of_pred[join_name(q.body[v].relation)] = free[v];
  }
  auto append_free = [&](const std::string& pred, std::vector<Term>& args) {
    auto it = free_of_pred.find(pred);
    if (it == free_of_pred.end()) return;
    for (const std::string& u : it->second) args.push_back(Term::variable(u));
  };

  // Guard literal for an unsafe rule whose head belongs to `relation`.
  FreshNames fresh(std::set<std::string>(vars.begin(), vars.end()));
  auto guard = [&](RewriteRule& r, const std::string& relation) {
    if (mode == GroundMode::kNaive) {
      r.body.push_back(Literal::positive(kGroundName, as_terms(q.head)));
      return;
    }
    std::set<std::string> used;
    for (const Term& t : r.head_args) {
      if (t.is_variable()) used.insert(t.text);
    }
    for (const Literal& l : r.body) {
      for (const Term& t : l.args) {
        if (t.is_variable()) used.insert(t.text);
      }
    }
    const Literal* occurrence = nullptr;
    for (const Literal& l : r.body) {
      if (l.kind == Literal::Kind::kPositive && l.predicate == relation) {
        occurrence = &l;
        break;
      }
    }
    std::vector<Term> args;
    fresh.reset();
    for (const Atom& a : q.body) {
      if (a.relation == relation && occurrence != nullptr) {
        for (std::size_t p : a.key_positions) args.push_back(occurrence->args[p]);
        continue;
      }
      for (std::size_t k = 0; k < a.key_positions.size(); ++k) {
        std::string z;
        do {
          z = fresh.next();
        } while (used.count(z) > 0);
        args.push_back(Term::variable(z));
      }
    }
    for (const std::string& u : q.head) args.push_back(Term::variable(u));
    r.body.push_back(Literal::positive(kGroundStarName, std::move(args)));
  };

  auto extend = [&](RewriteRule& r, const std::string& relation) {
    append_free(r.head, r.head_args);
    for (Literal& l : r.body) {
      if (l.kind != Literal::Kind::kNotEqual) append_free(l.predicate, l.args);
    }
    if (!rule_is_safe(r)) guard(r, relation);
  };
  for (std::size_t v = 0; v < n; ++v) {
    for (RewriteRule& r : g.fkey[v]) extend(r, q.body[v].relation);
    extend(g.exit[v], q.body[v].relation);
  }

  RewriteProgram p = assemble(q, tree, std::move(g), free);

  RewriteRule ground;
  PredicateInfo ginfo;
  if (mode == GroundMode::kStar) {
    ground.provenance = Provenance::kGroundStar;
    ground.head = kGroundStarName;
    ginfo.kind = PredicateInfo::Kind::kGroundStar;
    for (const Atom& a : q.body) {
      for (std::size_t pos : a.key_positions) {
        ground.head_args.push_back(a.terms[pos]);
        ginfo.columns.push_back(a.relation + "_" + a.attributes[pos]);
      }
    }
  } else {
    ground.provenance = Provenance::kGround;
    ground.head = kGroundName;
    ginfo.kind = PredicateInfo::Kind::kGround;
  }
  for (const std::string& u : q.head) {
    ground.head_args.push_back(Term::variable(u));
    ginfo.columns.push_back("u_" + u);
  }
  for (const Atom& a : q.body) ground.body.push_back(Literal::positive(a.relation, a.terms));
  ginfo.name = ground.head;
  ginfo.free_vars = q.head;
  p.strata.insert(p.strata.begin(), Rules{std::move(ground)});
  p.predicates.insert(p.predicates.begin(), std::move(ginfo));
  p.answer_vars = q.head;
  return p;
}

RewriteProgram rewrite(const ConjunctiveQuery& q, GroundMode mode) {
  PpjtCertificate cert = require_ppjt(q);
  if (q.is_boolean()) return rewrite_boolean(q, cert);
  return rewrite_nonboolean(q, cert, mode);
}

bool rule_is_safe(const RewriteRule& rule) {
  std::set<std::string> bound;
  for (const Literal& l : rule.body) {
    if (l.kind != Literal::Kind::kPositive) continue;
    for (const Term& t : l.args) {
      if (t.is_variable()) bound.insert(t.text);
    }
  }
  for (const Term& t : rule.head_args) {
    if (!term_bound(t, bound)) return false;
  }
  for (const Literal& l : rule.body) {
    if (l.kind == Literal::Kind::kPositive) continue;
    for (const Term& t : l.args) {
      if (!term_bound(t, bound)) return false;
    }
  }
  return true;
}

bool is_stratified(const RewriteProgram& p) {
  std::map<std::string, std::size_t> stratum_of;
  for (std::size_t s = 0; s < p.strata.size(); ++s) {
    for (const RewriteRule& r : p.strata[s]) {
      auto [it, inserted] = stratum_of.emplace(r.head, s);
      if (!inserted && it->second != s) return false;  // split across strata
    }
  }
  for (std::size_t s = 0; s < p.strata.size(); ++s) {
    for (const RewriteRule& r : p.strata[s]) {
      for (const Literal& l : r.body) {
        if (l.kind == Literal::Kind::kNotEqual) continue;
        auto it = stratum_of.find(l.predicate);
        if (it == stratum_of.end()) continue;  // base relation
        if (l.kind == Literal::Kind::kNegative && it->second >= s) return false;
        if (l.kind == Literal::Kind::kPositive && it->second > s) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Datalog text

namespace {

std::string join_strings(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string render_args(const std::vector<Term>& args) {
  std::vector<std::string> parts;
  for (const Term& t : args) parts.push_back(print_term(t));
  return join_strings(parts, ", ");
}

std::string kind_name(PredicateInfo::Kind k) {
  switch (k) {
    case PredicateInfo::Kind::kFkey: return "fkey";
    case PredicateInfo::Kind::kJoin: return "join";
    case PredicateInfo::Kind::kGround: return "ground";
    case PredicateInfo::Kind::kGroundStar: return "ground*";
  }
  return "?";
}

}  // namespace

std::string render_rule(const RewriteRule& rule) {
  std::string out = rule.head + "(" + render_args(rule.head_args) + ") :- ";
  std::vector<std::string> parts;
  for (const Literal& l : rule.body) {
    switch (l.kind) {
      case Literal::Kind::kPositive:
        parts.push_back(l.predicate + "(" + render_args(l.args) + ")");
        break;
      case Literal::Kind::kNegative:
        parts.push_back("not " + l.predicate + "(" + render_args(l.args) + ")");
        break;
      case Literal::Kind::kNotEqual:
        parts.push_back(print_term(l.args[0]) + " != " + print_term(l.args[1]));
        break;
    }
  }
  return out + join_strings(parts, ", ") + ".";
}

std::string render_datalog(const RewriteProgram& p) {
  std::string out = "% goal " + p.goal + "\n";
  if (!p.answer_vars.empty()) out += "% answer " + join_strings(p.answer_vars, ",") + "\n";
  for (const PredicateInfo& info : p.predicates) {
    out += "% pred " + info.name + " " + kind_name(info.kind) + " " +
           (info.relation.empty() ? "-" : info.relation) + " cols=" + join_strings(info.columns, ",") +
           " free=" + join_strings(info.free_vars, ",") + "\n";
  }
  for (const auto& stratum : p.strata) {
    out += "\n";
    for (const RewriteRule& r : stratum) {
      out += render_rule(r) + "  % " + provenance_tag(r.provenance) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SQL

namespace {

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string quote_literal(const std::string& value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string col(const std::string& alias, const std::string& column) {
  return alias + "." + quote_ident(column);
}

class SqlContext {
 public:
  SqlContext(const RewriteProgram& p, const Schema& schema) : program_(p), schema_(schema) {}

  // Column names of an EDB relation or derived predicate (nullary -> "one").
  std::vector<std::string> columns(const std::string& pred) const {
    if (const PredicateInfo* info = program_.predicate(pred)) {
      if (info->columns.empty()) return {"one"};
      return info->columns;
    }
    return schema_.at(pred).attributes;
  }

  bool nullary(const std::string& pred) const {
    const PredicateInfo* info = program_.predicate(pred);
    return info != nullptr && info->columns.empty();
  }

 private:
  const RewriteProgram& program_;
  const Schema& schema_;
};

// Variable bindings for one SELECT.
struct Scope {
  std::map<std::string, std::string> binding;

  std::string expr(const Term& t) const {
    if (t.is_constant()) return quote_literal(t.text);
    return binding.at(t.text);
  }

  // Binds new variables of a literal and returns equality conditions for
  // constants and already-bound variables.
  std::vector<std::string> bind(const std::string& alias, const std::vector<std::string>& columns,
                                const std::vector<Term>& args) {
    std::vector<std::string> conds;
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string c = col(alias, columns[i]);
      const Term& t = args[i];
      if (t.is_constant()) {
        conds.push_back(c + " = " + quote_literal(t.text));
      } else if (auto it = binding.find(t.text); it != binding.end()) {
        conds.push_back(c + " = " + it->second);
      } else {
        binding[t.text] = c;
      }
    }
    return conds;
  }
};

std::string and_all(const std::vector<std::string>& conds) {
  return conds.empty() ? "1 = 1" : join_strings(conds, " AND ");
}

std::string where_clause(const std::vector<std::string>& conds) {
  return conds.empty() ? "" : " WHERE " + join_strings(conds, " AND ");
}

const Literal* find_guard(const RewriteRule& r) {
  for (const Literal& l : r.body) {
    if (l.kind == Literal::Kind::kPositive &&
        (l.predicate == kGroundStarName || l.predicate == kGroundName)) {
      return &l;
    }
  }
  return nullptr;
}

std::string select_list(const Scope& scope, const std::vector<Term>& head) {
  if (head.empty()) return "1";
  std::vector<std::string> parts;
  for (const Term& t : head) parts.push_back(scope.expr(t));
  return join_strings(parts, ", ");
}

// FROM "R" a [JOIN guard g ON ...], returning pattern conditions on a.
std::string from_with_guard(const SqlContext& ctx, Scope& scope, const Literal& base,
                            const Literal* guard, std::vector<std::string>& where) {
  std::string out = " FROM " + quote_ident(base.predicate) + " a";
  std::vector<std::string> pattern = scope.bind("a", ctx.columns(base.predicate), base.args);
  where.insert(where.end(), pattern.begin(), pattern.end());
  if (guard != nullptr) {
    std::vector<std::string> on = scope.bind("g", ctx.columns(guard->predicate), guard->args);
    out += " JOIN " + quote_ident(guard->predicate) + " g ON " + and_all(on);
  }
  return out;
}

std::string render_rule1(const SqlContext& ctx, const RewriteRule& r) {
  Scope scope;
  std::vector<std::string> where;
  std::string from = from_with_guard(ctx, scope, r.body[0], find_guard(r), where);
  for (const Literal& l : r.body) {
    if (l.kind == Literal::Kind::kNotEqual) {
      where.push_back(scope.expr(l.args[0]) + " <> " + scope.expr(l.args[1]));
    }
  }
  return "SELECT " + select_list(scope, r.head_args) + from + where_clause(where);
}

std::string render_rule2(const SqlContext& ctx, const RewriteRule& r, const Schema& schema) {
  const Literal& first = r.body[0];
  const Literal& second = r.body[1];
  const RelationSchema& rel = schema.at(first.predicate);
  const Literal* diseq = nullptr;
  for (const Literal& l : r.body) {
    if (l.kind == Literal::Kind::kNotEqual) diseq = &l;
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < second.args.size(); ++i) {
    if (second.args[i] == diseq->args[0]) pos = i;
  }
  std::vector<std::string> keys;
  for (std::size_t p : rel.key_positions) keys.push_back(quote_ident(rel.attributes[p]));
  std::string key_list = join_strings(keys, ", ");
  std::string grouped = "SELECT " + key_list + " FROM (SELECT DISTINCT " + key_list + ", " +
                        quote_ident(rel.attributes[pos]) + " FROM " + quote_ident(rel.name) +
                        ") t GROUP BY " + key_list + " HAVING COUNT(*) > 1";
  const Literal* guard = find_guard(r);
  bool plain = guard == nullptr && r.head_args.size() == rel.key_positions.size();
  if (plain) return grouped;

  Scope scope;
  std::vector<std::string> where;
  std::string from = " FROM " + quote_ident(rel.name) + " a";
  std::vector<std::string> pattern = scope.bind("a", ctx.columns(rel.name), first.args);
  where.insert(where.end(), pattern.begin(), pattern.end());
  std::vector<std::string> on;
  for (std::size_t p : rel.key_positions) {
    on.push_back(col("b", rel.attributes[p]) + " = " + col("a", rel.attributes[p]));
  }
  from += " JOIN (" + grouped + ") b ON " + and_all(on);
  if (guard != nullptr) {
    std::vector<std::string> gon = scope.bind("g", ctx.columns(guard->predicate), guard->args);
    from += " JOIN " + quote_ident(guard->predicate) + " g ON " + and_all(gon);
  }
  return "SELECT " + select_list(scope, r.head_args) + from + where_clause(where);
}

// All Rule-3 instances of one head fused into chained LEFT OUTER JOINs.
std::string render_rule3(const SqlContext& ctx, const std::vector<const RewriteRule*>& rules) {
  const RewriteRule& r = *rules.front();
  Scope scope;
  std::vector<std::string> where;
  std::string from = from_with_guard(ctx, scope, r.body[0], find_guard(r), where);
  std::vector<std::string> nulls;
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const Literal* neg = nullptr;
    for (const Literal& l : rules[k]->body) {
      if (l.kind == Literal::Kind::kNegative) neg = &l;
    }
    std::string alias = "s" + std::to_string(k + 1);
    std::vector<std::string> cols = ctx.columns(neg->predicate);
    std::vector<std::string> on;
    for (std::size_t i = 0; i < neg->args.size(); ++i) {
      on.push_back(col(alias, cols[i]) + " = " + scope.expr(neg->args[i]));
    }
    from += " LEFT OUTER JOIN " + quote_ident(neg->predicate) + " " + alias + " ON " + and_all(on);
    nulls.push_back(col(alias, cols[0]) + " IS NULL");
  }
  std::string cond = "(" + join_strings(nulls, " OR ") + ")";
  if (!where.empty()) cond = and_all(where) + " AND " + cond;
  return "SELECT " + select_list(scope, r.head_args) + from + " WHERE " + cond;
}

std::string render_rule4(const SqlContext& ctx, const RewriteRule& r,
                         const std::vector<std::string>* names = nullptr) {
  Scope scope;
  std::vector<std::string> where;
  std::string from = from_with_guard(ctx, scope, r.body[0], find_guard(r), where);
  for (const Literal& l : r.body) {
    if (l.kind != Literal::Kind::kNegative) continue;
    std::vector<std::string> cols = ctx.columns(l.predicate);
    std::vector<std::string> match;
    for (std::size_t i = 0; i < l.args.size(); ++i) {
      match.push_back(col("f", cols[i]) + " = " + scope.expr(l.args[i]));
    }
    where.push_back("NOT EXISTS (SELECT * FROM " + quote_ident(l.predicate) + " f WHERE " +
                    and_all(match) + ")");
  }
  std::string list = select_list(scope, r.head_args);
  if (names != nullptr && !names->empty()) {
    std::vector<std::string> named;
    for (std::size_t i = 0; i < r.head_args.size(); ++i) {
      named.push_back(scope.expr(r.head_args[i]) + " AS " + quote_ident((*names)[i]));
    }
    list = join_strings(named, ", ");
  }
  std::string out = "SELECT DISTINCT " + list + from;
  out += where_clause(where);
  return out;
}

std::string render_ground(const SqlContext& ctx, const RewriteRule& r) {
  Scope scope;
  std::vector<std::string> tables;
  std::vector<std::string> where;
  for (std::size_t i = 0; i < r.body.size(); ++i) {
    const Literal& l = r.body[i];
    std::string alias = "a" + std::to_string(i);
    tables.push_back(quote_ident(l.predicate) + " " + alias);
    std::vector<std::string> conds = scope.bind(alias, ctx.columns(l.predicate), l.args);
    where.insert(where.end(), conds.begin(), conds.end());
  }
  std::string out = "SELECT DISTINCT " + select_list(scope, r.head_args) + " FROM " +
                    join_strings(tables, ", ");
  out += where_clause(where);
  return out;
}

}  // namespace

std::string render_sql(const RewriteProgram& p, const Schema& schema) {
  SqlContext ctx(p, schema);
  std::vector<std::string> ctes;
  std::string final_select;

  // Rules grouped by head, in program order.
  std::vector<std::string> heads;
  std::map<std::string, std::vector<const RewriteRule*>> by_head;
  for (const auto& stratum : p.strata) {
    for (const RewriteRule& r : stratum) {
      if (by_head[r.head].empty()) heads.push_back(r.head);
      by_head[r.head].push_back(&r);
    }
  }

  for (const std::string& head : heads) {
    const auto& rules = by_head[head];
    std::vector<std::string> branches;
    std::vector<const RewriteRule*> rule3;
    for (const RewriteRule* r : rules) {
      switch (r->provenance) {
        case Provenance::kRule1: branches.push_back(render_rule1(ctx, *r)); break;
        case Provenance::kRule2: branches.push_back(render_rule2(ctx, *r, schema)); break;
        case Provenance::kRule3: rule3.push_back(r); break;
        case Provenance::kRule4:
          if (head == p.goal) {
            final_select = render_rule4(ctx, *r, &p.answer_vars);
          } else {
            branches.push_back(render_rule4(ctx, *r));
          }
          break;
        case Provenance::kGround:
        case Provenance::kGroundStar: branches.push_back(render_ground(ctx, *r)); break;
      }
    }
    if (!rule3.empty()) branches.push_back(render_rule3(ctx, rule3));
    if (head == p.goal) continue;
    std::vector<std::string> cols;
    for (const std::string& c : ctx.columns(head)) cols.push_back(quote_ident(c));
    ctes.push_back(quote_ident(head) + "(" + join_strings(cols, ", ") + ") AS (\n  " +
                   join_strings(branches, "\n  UNION ALL\n  ") + "\n)");
  }

  std::string out;
  if (!ctes.empty()) out = "WITH " + join_strings(ctes, ",\n") + "\n";
  return out + final_select + ";\n";
}

}  // namespace lincqa
