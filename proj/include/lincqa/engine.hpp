#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lincqa/attack.hpp"
#include "lincqa/query.hpp"
#include "lincqa/rewriting.hpp"

namespace lincqa {

using ValueId = std::uint32_t;

/// Interns string values to dense ids.
class Dictionary {
 public:
  ValueId intern(std::string_view value);
  std::optional<ValueId> lookup(std::string_view value) const;
  const std::string& value(ValueId id) const { return values_[id]; }
  std::size_t size() const { return values_.size(); }

 private:
  std::unordered_map<std::string, ValueId> ids_;
  std::vector<std::string> values_;
};

/// Set of fixed-arity id tuples stored row-major, with an open-addressing
/// hash index. Tuples are compared in full on hash collision. Unary sets
/// index ids directly through 4 KB pages while that stays compact.
class TupleSet {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit TupleSet(std::size_t arity = 0);

  std::size_t arity() const { return arity_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  /// Returns (row index, inserted).
  std::pair<std::size_t, bool> insert(const ValueId* tuple);
  std::size_t find(const ValueId* tuple) const;
  bool contains(const ValueId* tuple) const { return find(tuple) != npos; }
  const ValueId* row(std::size_t i) const { return data_.data() + i * arity_; }
  void reserve(std::size_t rows);

 private:
  std::uint64_t hash(const ValueId* tuple) const;
  bool equal(std::size_t row, const ValueId* tuple) const;
  void grow();
  void leave_direct();

  static constexpr std::size_t kPageBits = 10;
  static constexpr std::size_t kPageSize = std::size_t{1} << kPageBits;

  std::size_t arity_;
  std::size_t count_ = 0;
  std::vector<ValueId> data_;
  // 0 = empty; else high 32 bits of the hash over (row + 1), so most
  // mismatches are rejected without touching the row data.
  static constexpr std::uint64_t kTagMask = 0xffffffff00000000ULL;
  static constexpr std::uint64_t kRowMask = 0x00000000ffffffffULL;
  static std::uint64_t make_slot(std::uint64_t h, std::size_t row) { return (h & kTagMask) | (row + 1); }

  std::vector<std::uint64_t> slots_;
  std::size_t mask_ = 0;

  bool direct_ = false;
  // Page p maps id p * kPageSize + i to row + 1 (0 = absent); empty if untouched.
  std::vector<std::vector<std::uint32_t>> pages_;
  std::size_t page_count_ = 0;
};

/// Rows grouped by the values at `positions`: group g holds
/// rows[offsets[g] .. offsets[g+1]).
struct Grouping {
  std::vector<std::size_t> positions;
  TupleSet keys;
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> rows;

  static Grouping build(const TupleSet& table, std::vector<std::size_t> positions);
  /// Same over `n` row-major rows of the given arity.
  static Grouping build(const ValueId* data, std::size_t n, std::size_t arity, std::vector<std::size_t> positions);
  std::size_t group_of(const ValueId* key) const { return keys.find(key); }
};

/// One base relation with its primary-key block index, maintained on insert.
class Relation {
 public:
  explicit Relation(RelationSchema schema);

  const RelationSchema& schema() const { return schema_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t arity() const { return schema_.arity(); }
  const TupleSet& rows() const { return rows_; }
  const ValueId* row(std::size_t i) const { return rows_.row(i); }

  /// Returns false if the exact tuple was already present.
  bool insert(const ValueId* tuple);

  std::size_t block_count() const { return block_size_.size(); }
  std::uint32_t block_of(std::size_t row) const { return block_of_row_[row]; }
  std::uint32_t block_size(std::size_t block) const { return block_size_[block]; }
  std::uint32_t block_first_row(std::size_t block) const { return block_first_row_[block]; }
  /// Next row of the same block, or kNoRow.
  std::uint32_t next_in_block(std::size_t row) const { return next_in_block_[row]; }
  static constexpr std::uint32_t kNoRow = static_cast<std::uint32_t>(-1);
  const TupleSet& block_keys() const { return block_keys_; }
  bool is_consistent() const { return block_keys_.size() == rows_.size(); }

  /// Rows grouped by block, in block order.
  Grouping blocks() const;

 private:
  RelationSchema schema_;
  TupleSet rows_;
  TupleSet block_keys_;
  std::vector<std::uint32_t> block_of_row_;
  std::vector<std::uint32_t> block_first_row_;
  std::vector<std::uint32_t> block_last_row_;
  std::vector<std::uint32_t> next_in_block_;
  std::vector<std::uint32_t> block_size_;
  std::vector<ValueId> scratch_;
};

class DatabaseInstance {
 public:
  DatabaseInstance() = default;
  explicit DatabaseInstance(const Schema& schema);

  void add_relation(const RelationSchema& schema);
  /// Appends a tuple (set semantics). Throws kUnknownRelation, kArityMismatch.
  bool insert(const std::string& relation, const std::vector<std::string>& values);

  const Relation* find(std::string_view name) const;
  const Relation& at(std::string_view name) const;
  const std::map<std::string, Relation, std::less<>>& relations() const { return relations_; }
  const Schema& schema() const { return schema_; }
  Dictionary& dictionary() { return dict_; }
  const Dictionary& dictionary() const { return dict_; }

  /// Total row count across relations.
  std::size_t size() const;
  bool is_consistent() const;

 private:
  Schema schema_;
  Dictionary dict_;
  std::map<std::string, Relation, std::less<>> relations_;
  std::vector<ValueId> scratch_;
};

/// Reads `<Relation>.csv` for every relation of `schema` from `dir`.
/// Throws kMissingFile, kHeaderMismatch, kRaggedRow.
DatabaseInstance load_csv(const std::string& dir, const Schema& schema);
/// Writes one `<Relation>.csv` per relation, rows in insertion order.
void write_csv(const DatabaseInstance& db, const std::string& dir);

/// Set-valued answers; Boolean results have no columns and hold either no
/// tuple (false) or the empty tuple (true). Bulk results from the engine are
/// kept as flat distinct rows and only sorted into `tuples()` on demand.
class AnswerSet {
 public:
  std::vector<std::string> columns;

  static AnswerSet boolean(bool value);
  /// `cells` holds `rows` distinct tuples of `arity` values, row-major.
  static AnswerSet from_distinct_rows(std::vector<std::string> columns, std::size_t arity, std::size_t rows,
                                      std::vector<std::string> cells);

  const std::set<std::vector<std::string>>& tuples() const;
  void insert(std::vector<std::string> t);

  bool is_boolean() const { return columns.empty(); }
  bool truth() const { return size() > 0; }
  std::size_t size() const { return pending_rows_ > 0 ? pending_rows_ : set_.size(); }
  bool contains(const std::vector<std::string>& t) const { return tuples().count(t) > 0; }
  bool subset_of(const AnswerSet& other) const;
  std::string to_csv() const;

  bool operator==(const AnswerSet& other) const { return tuples() == other.tuples(); }

 private:
  void materialize() const;

  mutable std::set<std::vector<std::string>> set_;
  // Pending rows are never mixed with a non-empty set_.
  mutable std::vector<std::string> cells_;
  mutable std::size_t pending_rows_ = 0;
  std::size_t arity_ = 0;
};

/// Content of every derived predicate after evaluation.
struct ProgramResult {
  std::map<std::string, AnswerSet> predicates;
  AnswerSet goal;
};

/// Full bottom-up evaluation. Throws kUnboundPredicate when a body literal
/// names neither a base relation nor a derived predicate.
ProgramResult evaluate(const RewriteProgram& p, const DatabaseInstance& db);
/// Goal content only.
AnswerSet eval_program(const RewriteProgram& p, const DatabaseInstance& db);

/// Possible answers via Yannakakis semi-join reduction and projected joins.
/// Throws kNotAcyclic.
AnswerSet eval_query(const ConjunctiveQuery& q, const DatabaseInstance& db);

enum class Strategy { kProgram, kPerAnswer };

struct CqaOptions {
  Strategy strategy = Strategy::kProgram;
  GroundMode ground = GroundMode::kStar;
  bool full_fast_path = true;
};

/// Consistent answers. Throws kNoPpjt, kDisconnectedQuery.
AnswerSet consistent_answers(const ConjunctiveQuery& q, const DatabaseInstance& db,
                             const CqaOptions& options = {});

/// Evaluates q over the rows that sit in singleton blocks only.
AnswerSet eval_query_consistent_part(const ConjunctiveQuery& q, const DatabaseInstance& db);

inline constexpr std::uint64_t kMaxRepairs = std::uint64_t{1} << 20;

/// Product of block sizes over the relations of q (all relations when q is
/// null), saturating at UINT64_MAX.
std::uint64_t count_repairs(const DatabaseInstance& db, const ConjunctiveQuery* q = nullptr);

/// Enumerates repairs as a per-relation choice of one row per block.
class RepairIterator {
 public:
  explicit RepairIterator(const DatabaseInstance& db, std::vector<std::string> relations = {});

  bool done() const { return done_; }
  void next();
  /// Chosen row ids of the current repair for relation index r.
  const std::vector<std::uint32_t>& chosen(std::size_t r) const { return chosen_[r]; }
  const std::vector<std::string>& relation_names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<Grouping> blocks_;
  std::vector<std::vector<std::uint32_t>> cursor_;
  std::vector<std::vector<std::uint32_t>> chosen_;
  bool done_ = false;
};

/// Intersection of q's answers over all repairs. Throws kTooManyRepairs.
AnswerSet oracle_consistent_answers(const ConjunctiveQuery& q, const DatabaseInstance& db);

/// Keys c of non-empty blocks of atom `atom` such that db is a yes-instance
/// of CERTAINTY(q[key(atom) -> c]), decided by the oracle. q must be Boolean.
std::set<std::vector<std::string>> good_keys(const ConjunctiveQuery& q, const DatabaseInstance& db,
                                             std::size_t atom);

}  // namespace lincqa
