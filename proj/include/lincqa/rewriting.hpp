#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lincqa/attack.hpp"
#include "lincqa/query.hpp"

namespace lincqa {

struct Literal {
  enum class Kind { kPositive, kNegative, kNotEqual };

  Kind kind = Kind::kPositive;
  std::string predicate;  // empty for kNotEqual
  std::vector<Term> args;  // kNotEqual: exactly two terms

  static Literal positive(std::string pred, std::vector<Term> args) {
    return {Kind::kPositive, std::move(pred), std::move(args)};
  }
  static Literal negative(std::string pred, std::vector<Term> args) {
    return {Kind::kNegative, std::move(pred), std::move(args)};
  }
  static Literal not_equal(Term a, Term b) { return {Kind::kNotEqual, {}, {std::move(a), std::move(b)}}; }

  bool operator==(const Literal&) const = default;
};

enum class Provenance { kRule1, kRule2, kRule3, kRule4, kGround, kGroundStar };

std::string provenance_tag(Provenance p);

struct RewriteRule {
  std::string head;
  std::vector<Term> head_args;
  std::vector<Literal> body;
  Provenance provenance = Provenance::kRule4;

  bool operator==(const RewriteRule&) const = default;
};

/// Column layout of a derived predicate.
struct PredicateInfo {
  enum class Kind { kFkey, kJoin, kGround, kGroundStar };

  std::string name;
  Kind kind = Kind::kJoin;
  std::string relation;              // owning relation for fkey/join
  std::vector<std::string> columns;  // SQL column names
  std::vector<std::string> free_vars;  // appended u_T, in head order

  bool operator==(const PredicateInfo&) const = default;
};

struct RewriteProgram {
  std::vector<std::vector<RewriteRule>> strata;
  std::string goal;
  std::vector<std::string> answer_vars;
  std::vector<PredicateInfo> predicates;  // in definition order

  const PredicateInfo* predicate(const std::string& name) const;
  std::size_t rule_count() const;
  bool is_boolean() const { return answer_vars.empty(); }

  bool operator==(const RewriteProgram&) const = default;
};

enum class GroundMode { kStar, kNaive };

std::string fkey_name(const std::string& relation);
std::string join_name(const std::string& relation);
inline constexpr const char* kGroundStarName = "ground_star";
inline constexpr const char* kGroundName = "ground";

/// Rules 1-4 over a PPJT of the Boolean query q. Throws kInvalidCertificate
/// if `cert` does not verify for q.
RewriteProgram rewrite_boolean(const ConjunctiveQuery& q, const PpjtCertificate& cert);

/// Non-Boolean rewriting; `cert` is a PPJT of the head-frozen query.
RewriteProgram rewrite_nonboolean(const ConjunctiveQuery& q, const PpjtCertificate& cert,
                                  GroundMode mode = GroundMode::kStar);

/// Dispatches on q.is_boolean() and finds the certificate. Throws kNoPpjt.
RewriteProgram rewrite(const ConjunctiveQuery& q, GroundMode mode = GroundMode::kStar);

std::string render_datalog(const RewriteProgram& p);
std::string render_rule(const RewriteRule& rule);

/// One WITH-statement; every identifier is double-quoted.
std::string render_sql(const RewriteProgram& p, const Schema& schema);

/// Syntactic checks used by tests and by the generator's own assertions.
bool rule_is_safe(const RewriteRule& rule);
bool is_stratified(const RewriteProgram& p);

}  // namespace lincqa
