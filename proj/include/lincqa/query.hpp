#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lincqa {

/// Attribute layout and primary key of one relation.
struct RelationSchema {
  std::string name;
  std::vector<std::string> attributes;
  std::vector<std::size_t> key_positions;  // strictly increasing

  std::size_t arity() const { return attributes.size(); }
  bool is_key_position(std::size_t pos) const;

  bool operator==(const RelationSchema&) const = default;
};

/// Relations in declaration order.
class Schema {
 public:
  Schema() = default;

  /// Validates the relation (nonempty key, unique attribute names, key
  /// positions in range) and appends it. Throws on duplicates.
  void add(RelationSchema relation);

  const RelationSchema* find(std::string_view name) const;
  const RelationSchema& at(std::string_view name) const;
  const std::vector<RelationSchema>& relations() const { return relations_; }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<RelationSchema> relations_;
};

/// Parses the schema file format: one `Rel(a*, b, c)` per line, `*` marks
/// key attributes, `#` starts a comment.
Schema parse_schema(std::string_view text);
Schema load_schema(const std::string& path);
std::string print_schema(const Schema& schema);

/// A variable or a constant. Constants are opaque strings.
struct Term {
  enum class Kind { kVariable, kConstant };

  Kind kind = Kind::kVariable;
  std::string text;

  static Term variable(std::string name) { return {Kind::kVariable, std::move(name)}; }
  static Term constant(std::string value) { return {Kind::kConstant, std::move(value)}; }

  bool is_variable() const { return kind == Kind::kVariable; }
  bool is_constant() const { return kind == Kind::kConstant; }

  auto operator<=>(const Term&) const = default;
};

/// One body atom, bound to its relation's schema.
struct Atom {
  std::string relation;
  std::vector<Term> terms;
  std::vector<std::size_t> key_positions;
  std::vector<std::string> attributes;

  std::size_t arity() const { return terms.size(); }
  bool is_key_position(std::size_t pos) const;

  /// Distinct variables in key positions, in order of first occurrence.
  std::vector<std::string> key_vars() const;
  /// Distinct variables, in order of first occurrence.
  std::vector<std::string> vars() const;
  std::set<std::string> var_set() const;

  bool operator==(const Atom& other) const {
    return relation == other.relation && terms == other.terms &&
           key_positions == other.key_positions;
  }
};

/// q(u) :- R1(...), ..., Rn(...).
struct ConjunctiveQuery {
  std::string name = "q";
  std::vector<std::string> head;
  std::vector<Atom> body;

  bool is_boolean() const { return head.empty(); }
  bool is_full() const;
  bool is_self_join_free() const;
  bool is_connected() const;

  /// Distinct body variables, in order of first occurrence.
  std::vector<std::string> variables() const;

  bool operator==(const ConjunctiveQuery&) const = default;
};

/// Parses `q(x, y) :- R(x, 'c'), S(y, 3).` against `schema`. Duplicate
/// atoms are collapsed; a note for each is appended to `warnings`.
ConjunctiveQuery parse_query(std::string_view text, const Schema& schema,
                             std::vector<std::string>* warnings = nullptr);
ConjunctiveQuery load_query(const std::string& path, const Schema& schema,
                            std::vector<std::string>* warnings = nullptr);

std::string print_term(const Term& term);
std::string print_atom(const Atom& atom);
std::string print_query(const ConjunctiveQuery& q);

/// Replaces every occurrence of each assigned variable by its constant and
/// drops assigned variables from the head. Throws kUnknownVariable if a key
/// of `assignment` is not a variable of `q`.
ConjunctiveQuery substitute(const ConjunctiveQuery& q,
                            const std::map<std::string, std::string>& assignment);

/// Maximal variable-sharing groups of body atoms, each as a Boolean query.
/// Components are ordered by their lowest atom index.
std::vector<ConjunctiveQuery> connected_components(const ConjunctiveQuery& q);

/// Atom indices of each component, same order as connected_components().
std::vector<std::vector<std::size_t>> component_indices(const ConjunctiveQuery& q);

/// Boolean query over the given body atoms (indices into q.body, kept in order).
ConjunctiveQuery subquery(const ConjunctiveQuery& q, const std::vector<std::size_t>& atoms);

/// Head variables replaced by fresh constants that cannot occur in data.
struct FrozenQuery {
  ConjunctiveQuery query;
  std::map<std::string, std::string> constant_to_var;
  std::map<std::string, std::string> var_to_constant;
};

FrozenQuery freeze_head(const ConjunctiveQuery& q);
bool is_frozen_constant(const Term& term);

}  // namespace lincqa
