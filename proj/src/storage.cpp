#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lincqa/engine.hpp"
#include "lincqa/error.hpp"

namespace lincqa {

// ---------------------------------------------------------------------------
// Dictionary

ValueId Dictionary::intern(std::string_view value) {
  auto it = ids_.find(std::string(value));
  if (it != ids_.end()) return it->second;
  ValueId id = static_cast<ValueId>(values_.size());
  values_.emplace_back(value);
  ids_.emplace(values_.back(), id);
  return id;
}

std::optional<ValueId> Dictionary::lookup(std::string_view value) const {
  auto it = ids_.find(std::string(value));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// TupleSet

TupleSet::TupleSet(std::size_t arity) : arity_(arity), direct_(arity == 1) {}

void TupleSet::leave_direct() {
  direct_ = false;
  pages_.clear();
  pages_.shrink_to_fit();
  page_count_ = 0;
  reserve(count_);
}

// The low six bits of the last column pass through to the slot index, so
// tuples that differ only there land in neighbouring slots. Dictionary ids
// are assigned in load order, which keeps scans over loaded rows local in
// the table; the remaining bits are fully mixed.
std::uint64_t TupleSet::hash(const ValueId* tuple) const {
  constexpr std::uint64_t kLow = 63;
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ arity_;
  for (std::size_t i = 0; i < arity_; ++i) {
    h ^= i + 1 == arity_ ? tuple[i] & ~kLow : tuple[i];
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 31;
  }
  h ^= h >> 29;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 32;
  std::uint64_t low = tuple[arity_ - 1] & kLow;
  return ((h ^ (low * 0x9e3779b97f4a7c15ULL)) & kTagMask) | (h & ~kLow & ~kTagMask) | low;
}

bool TupleSet::equal(std::size_t row, const ValueId* tuple) const {
  const ValueId* r = data_.data() + row * arity_;
  for (std::size_t i = 0; i < arity_; ++i) {
    if (r[i] != tuple[i]) return false;
  }
  return true;
}

void TupleSet::reserve(std::size_t rows) {
  data_.reserve(rows * arity_);
  if (direct_) return;
  std::size_t want = 16;
  while (want < rows * 2) want <<= 1;
  if (want > slots_.size()) {
    decltype(slots_) old;
    old.swap(slots_);
    slots_.assign(want, 0);
    mask_ = want - 1;
    for (std::size_t r = 0; r < count_; ++r) {
      std::uint64_t h = hash(row(r));
      std::size_t s = h & mask_;
      while (slots_[s] != 0) s = (s + 1) & mask_;
      slots_[s] = make_slot(h, r);
    }
  }
}

void TupleSet::grow() { reserve(std::max<std::size_t>(count_ * 2, 8)); }

std::pair<std::size_t, bool> TupleSet::insert(const ValueId* tuple) {
  if (arity_ == 0) {
    if (count_ > 0) return {0, false};
    count_ = 1;
    return {0, true};
  }
  if (direct_) {
    // Pages stay within 16 ids per member plus a fixed allowance.
    constexpr std::size_t kSlackPages = 64;
    std::size_t p = tuple[0] >> kPageBits;
    if (p >= pages_.size() || pages_[p].empty()) {
      if ((page_count_ + 1) * kPageSize > 16 * (count_ + 1) + kSlackPages * kPageSize) {
        leave_direct();
        return insert(tuple);
      }
      if (p >= pages_.size()) pages_.resize(p + 1);
      pages_[p].assign(kPageSize, 0);
      ++page_count_;
    }
    std::uint32_t& e = pages_[p][tuple[0] & (kPageSize - 1)];
    if (e != 0) return {e - 1, false};
    e = static_cast<std::uint32_t>(count_ + 1);
    data_.push_back(tuple[0]);
    return {count_++, true};
  }
  if ((count_ + 1) * 2 > slots_.size()) grow();
  std::uint64_t h = hash(tuple);
  std::uint64_t tag = h & kTagMask;
  std::size_t s = h & mask_;
  while (slots_[s] != 0) {
    if ((slots_[s] & kTagMask) == tag) {
      std::size_t r = (slots_[s] & kRowMask) - 1;
      if (equal(r, tuple)) return {r, false};
    }
    s = (s + 1) & mask_;
  }
  slots_[s] = make_slot(h, count_);
  data_.insert(data_.end(), tuple, tuple + arity_);
  return {count_++, true};
}

std::size_t TupleSet::find(const ValueId* tuple) const {
  if (arity_ == 0) return count_ > 0 ? 0 : npos;
  if (count_ == 0) return npos;
  if (direct_) {
    std::size_t p = tuple[0] >> kPageBits;
    if (p >= pages_.size() || pages_[p].empty()) return npos;
    std::uint32_t e = pages_[p][tuple[0] & (kPageSize - 1)];
    return e == 0 ? npos : e - 1;
  }
  std::uint64_t h = hash(tuple);
  std::uint64_t tag = h & kTagMask;
  std::size_t s = h & mask_;
  while (slots_[s] != 0) {
    if ((slots_[s] & kTagMask) == tag) {
      std::size_t r = (slots_[s] & kRowMask) - 1;
      if (equal(r, tuple)) return r;
    }
    s = (s + 1) & mask_;
  }
  return npos;
}

// ---------------------------------------------------------------------------
// Grouping

Grouping Grouping::build(const TupleSet& table, std::vector<std::size_t> positions) {
  return build(table.size() > 0 ? table.row(0) : nullptr, table.size(), table.arity(), std::move(positions));
}

Grouping Grouping::build(const ValueId* data, std::size_t n, std::size_t arity, std::vector<std::size_t> positions) {
  Grouping g;
  g.positions = std::move(positions);
  g.keys = TupleSet(g.positions.size());
  std::vector<std::uint32_t> group_of_row(n);
  std::vector<ValueId> key(g.positions.size());
  for (std::size_t r = 0; r < n; ++r) {
    const ValueId* row = data + r * arity;
    for (std::size_t i = 0; i < g.positions.size(); ++i) key[i] = row[g.positions[i]];
    group_of_row[r] = static_cast<std::uint32_t>(g.keys.insert(key.data()).first);
  }
  g.offsets.assign(g.keys.size() + 1, 0);
  for (std::uint32_t k : group_of_row) ++g.offsets[k + 1];
  for (std::size_t k = 0; k < g.keys.size(); ++k) g.offsets[k + 1] += g.offsets[k];
  g.rows.resize(n);
  std::vector<std::uint32_t> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (std::size_t r = 0; r < n; ++r) g.rows[fill[group_of_row[r]]++] = static_cast<std::uint32_t>(r);
  return g;
}

// ---------------------------------------------------------------------------
// Relation

Relation::Relation(RelationSchema schema)
    : schema_(std::move(schema)), rows_(schema_.arity()), block_keys_(schema_.key_positions.size()) {
  scratch_.resize(schema_.key_positions.size());
}

bool Relation::insert(const ValueId* tuple) {
  auto [row, inserted] = rows_.insert(tuple);
  if (!inserted) return false;
  for (std::size_t i = 0; i < schema_.key_positions.size(); ++i) scratch_[i] = tuple[schema_.key_positions[i]];
  auto [block, fresh] = block_keys_.insert(scratch_.data());
  if (fresh) {
    block_first_row_.push_back(static_cast<std::uint32_t>(row));
    block_last_row_.push_back(static_cast<std::uint32_t>(row));
    block_size_.push_back(0);
  } else {
    next_in_block_[block_last_row_[block]] = static_cast<std::uint32_t>(row);
    block_last_row_[block] = static_cast<std::uint32_t>(row);
  }
  block_of_row_.push_back(static_cast<std::uint32_t>(block));
  next_in_block_.push_back(kNoRow);
  ++block_size_[block];
  return true;
}

Grouping Relation::blocks() const {
  Grouping g;
  g.positions = schema_.key_positions;
  g.keys = block_keys_;
  g.offsets.assign(block_count() + 1, 0);
  for (std::size_t b = 0; b < block_count(); ++b) g.offsets[b + 1] = g.offsets[b] + block_size_[b];
  g.rows.resize(size());
  std::vector<std::uint32_t> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (std::size_t r = 0; r < size(); ++r) g.rows[fill[block_of_row_[r]]++] = static_cast<std::uint32_t>(r);
  return g;
}

// ---------------------------------------------------------------------------
// DatabaseInstance

DatabaseInstance::DatabaseInstance(const Schema& schema) {
  for (const RelationSchema& r : schema.relations()) add_relation(r);
}

void DatabaseInstance::add_relation(const RelationSchema& schema) {
  if (schema_.find(schema.name) == nullptr) schema_.add(schema);
  relations_.try_emplace(schema.name, schema);
}

bool DatabaseInstance::insert(const std::string& relation, const std::vector<std::string>& values) {
  auto it = relations_.find(relation);
  if (it == relations_.end()) throw Error(ErrorCode::kUnknownRelation, relation);
  if (values.size() != it->second.arity()) {
    throw Error(ErrorCode::kArityMismatch, relation + " expects " + std::to_string(it->second.arity()) +
                                               " values, got " + std::to_string(values.size()));
  }
  scratch_.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) scratch_[i] = dict_.intern(values[i]);
  return it->second.insert(scratch_.data());
}

const Relation* DatabaseInstance::find(std::string_view name) const {
  auto it = relations_.find(name);
  return it == relations_.end() ? nullptr : &it->second;
}

const Relation& DatabaseInstance::at(std::string_view name) const {
  const Relation* r = find(name);
  if (r == nullptr) throw Error(ErrorCode::kUnboundPredicate, "no relation " + std::string(name));
  return *r;
}

std::size_t DatabaseInstance::size() const {
  std::size_t n = 0;
  for (const auto& [name, rel] : relations_) n += rel.size();
  return n;
}

bool DatabaseInstance::is_consistent() const {
  return std::all_of(relations_.begin(), relations_.end(),
                     [](const auto& entry) { return entry.second.is_consistent(); });
}

// ---------------------------------------------------------------------------
// CSV

namespace {

// Splits one CSV record starting at `pos`; advances past the line break.
bool read_record(const std::string& text, std::size_t& pos, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field += c;
      ++pos;
      continue;
    }
    if (c == '"') {
      quoted = true;
      was_quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    } else {
      field += c;
      ++pos;
    }
  }
  if (!fields.empty() || !field.empty() || was_quoted) fields.push_back(std::move(field));
  return true;
}

std::string csv_field(const std::string& v) {
  bool quote = v.empty() || v.find_first_of(",\"\r\n") != std::string::npos;
  if (!quote) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

DatabaseInstance load_csv(const std::string& dir, const Schema& schema) {
  DatabaseInstance db(schema);
  for (const RelationSchema& rel : schema.relations()) {
    std::filesystem::path path = std::filesystem::path(dir) / (rel.name + ".csv");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kMissingFile, path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    std::size_t pos = 0;
    std::vector<std::string> fields;
    // Header; an entirely empty file is an empty relation.
    while (read_record(text, pos, fields) && fields.empty()) {
    }
    if (fields.empty()) continue;
    if (fields != rel.attributes) {
      throw Error(ErrorCode::kHeaderMismatch, path.string() + " header does not match " + rel.name);
    }
    std::size_t line = 1;
    while (read_record(text, pos, fields)) {
      ++line;
      if (fields.empty()) continue;
      if (fields.size() != rel.arity()) {
        throw Error(ErrorCode::kRaggedRow, path.string() + " line " + std::to_string(line) + " has " +
                                               std::to_string(fields.size()) + " fields");
      }
      db.insert(rel.name, fields);
    }
  }
  return db;
}

void write_csv(const DatabaseInstance& db, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, rel] : db.relations()) {
    std::ofstream out(std::filesystem::path(dir) / (name + ".csv"), std::ios::binary);
    if (!out) throw Error(ErrorCode::kMissingFile, "cannot write " + dir + "/" + name + ".csv");
    const auto& attrs = rel.schema().attributes;
    for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? "," : "") << csv_field(attrs[i]);
    out << "\n";
    for (std::size_t r = 0; r < rel.size(); ++r) {
      const ValueId* row = rel.row(r);
      for (std::size_t i = 0; i < rel.arity(); ++i) {
        out << (i ? "," : "") << csv_field(db.dictionary().value(row[i]));
      }
      out << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// AnswerSet

AnswerSet AnswerSet::boolean(bool value) {
  AnswerSet a;
  if (value) a.set_.insert(std::vector<std::string>{});
  return a;
}

AnswerSet AnswerSet::from_distinct_rows(std::vector<std::string> columns, std::size_t arity, std::size_t rows,
                                        std::vector<std::string> cells) {
  AnswerSet a;
  a.columns = std::move(columns);
  a.arity_ = arity;
  a.pending_rows_ = rows;
  a.cells_ = std::move(cells);
  return a;
}

void AnswerSet::materialize() const {
  if (pending_rows_ == 0) return;
  std::vector<std::vector<std::string>> rows(pending_rows_);
  for (std::size_t r = 0; r < pending_rows_; ++r) {
    auto first = cells_.begin() + static_cast<std::ptrdiff_t>(r * arity_);
    rows[r].assign(std::make_move_iterator(first), std::make_move_iterator(first + static_cast<std::ptrdiff_t>(arity_)));
  }
  // Sorted input lets the set be built in linear time.
  std::sort(rows.begin(), rows.end());
  set_ = std::set<std::vector<std::string>>(std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  cells_.clear();
  cells_.shrink_to_fit();
  pending_rows_ = 0;
}

const std::set<std::vector<std::string>>& AnswerSet::tuples() const {
  materialize();
  return set_;
}

void AnswerSet::insert(std::vector<std::string> t) {
  materialize();
  set_.insert(std::move(t));
}

bool AnswerSet::subset_of(const AnswerSet& other) const {
  const auto& mine = tuples();
  const auto& theirs = other.tuples();
  return std::includes(theirs.begin(), theirs.end(), mine.begin(), mine.end());
}

std::string AnswerSet::to_csv() const {
  if (is_boolean()) return truth() ? "true\n" : "false\n";
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
  out += "\n";
  for (const auto& t : tuples()) {
    for (std::size_t i = 0; i < t.size(); ++i) out += (i ? "," : "") + csv_field(t[i]);
    out += "\n";
  }
  return out;
}

}  // namespace lincqa
