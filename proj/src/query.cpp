#include "lincqa/query.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lincqa/error.hpp"

namespace lincqa {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#' || c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!accept(token)) fail("expected '" + std::string(token) + "'");
  }

  std::string identifier() {
    skip_space();
    if (pos_ >= text_.size() || !is_ident_start(text_[pos_])) fail("expected identifier");
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Term term() {
    char c = peek();
    if (c == '\'') {
      ++pos_;
      std::string value;
      while (true) {
        if (pos_ >= text_.size()) fail("unterminated string constant");
        char d = text_[pos_++];
        if (d == '\'') {
          if (pos_ < text_.size() && text_[pos_] == '\'') {
            value += '\'';
            ++pos_;
            continue;
          }
          break;
        }
        value += d;
      }
      return Term::constant(std::move(value));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      std::size_t start = pos_;
      if (c == '-') ++pos_;
      std::size_t digits = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == digits) fail("expected digits");
      return Term::constant(std::string(text_.substr(start, pos_ - start)));
    }
    return Term::variable(identifier());
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1 + std::count(text_.begin(), text_.begin() + pos_, '\n');
    throw Error(ErrorCode::kSyntaxError, what + " at line " + std::to_string(line));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void push_unique(std::vector<std::string>& out, const std::string& v) {
  if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
}

bool shares_variable(const Atom& a, const Atom& b) {
  for (const Term& t : a.terms) {
    if (!t.is_variable()) continue;
    for (const Term& u : b.terms) {
      if (u.is_variable() && u.text == t.text) return true;
    }
  }
  return false;
}

}  // namespace

bool RelationSchema::is_key_position(std::size_t pos) const {
  return std::binary_search(key_positions.begin(), key_positions.end(), pos);
}

void Schema::add(RelationSchema relation) {
  if (find(relation.name) != nullptr) {
    throw Error(ErrorCode::kSyntaxError, "relation " + relation.name + " declared twice");
  }
  if (relation.attributes.empty()) {
    throw Error(ErrorCode::kSyntaxError, "relation " + relation.name + " has no attributes");
  }
  if (relation.key_positions.empty()) {
    throw Error(ErrorCode::kSyntaxError, "relation " + relation.name + " has no key");
  }
  for (std::size_t i = 0; i < relation.key_positions.size(); ++i) {
    if (relation.key_positions[i] >= relation.arity() ||
        (i > 0 && relation.key_positions[i] <= relation.key_positions[i - 1])) {
      throw Error(ErrorCode::kSyntaxError, "bad key positions for " + relation.name);
    }
  }
  std::set<std::string> seen(relation.attributes.begin(), relation.attributes.end());
  if (seen.size() != relation.attributes.size()) {
    throw Error(ErrorCode::kSyntaxError, "duplicate attribute name in " + relation.name);
  }
  relations_.push_back(std::move(relation));
}

const RelationSchema* Schema::find(std::string_view name) const {
  for (const RelationSchema& r : relations_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const RelationSchema& Schema::at(std::string_view name) const {
  const RelationSchema* r = find(name);
  if (r == nullptr) throw Error(ErrorCode::kUnknownRelation, std::string(name));
  return *r;
}

Schema parse_schema(std::string_view text) {
  Schema schema;
  Lexer lex(text);
  while (!lex.at_end()) {
    RelationSchema rel;
    rel.name = lex.identifier();
    lex.expect("(");
    do {
      std::string attr = lex.identifier();
      if (lex.accept("*")) rel.key_positions.push_back(rel.attributes.size());
      rel.attributes.push_back(std::move(attr));
    } while (lex.accept(","));
    lex.expect(")");
    lex.accept(".");
    schema.add(std::move(rel));
  }
  return schema;
}

Schema load_schema(const std::string& path) { return parse_schema(read_file(path)); }

std::string print_schema(const Schema& schema) {
  std::string out;
  for (const RelationSchema& r : schema.relations()) {
    out += r.name + "(";
    for (std::size_t i = 0; i < r.arity(); ++i) {
      if (i > 0) out += ", ";
      out += r.attributes[i];
      if (r.is_key_position(i)) out += "*";
    }
    out += ")\n";
  }
  return out;
}

bool Atom::is_key_position(std::size_t pos) const {
  return std::binary_search(key_positions.begin(), key_positions.end(), pos);
}

std::vector<std::string> Atom::key_vars() const {
  std::vector<std::string> out;
  for (std::size_t p : key_positions) {
    if (terms[p].is_variable()) push_unique(out, terms[p].text);
  }
  return out;
}

std::vector<std::string> Atom::vars() const {
  std::vector<std::string> out;
  for (const Term& t : terms) {
    if (t.is_variable()) push_unique(out, t.text);
  }
  return out;
}

std::set<std::string> Atom::var_set() const {
  std::set<std::string> out;
  for (const Term& t : terms) {
    if (t.is_variable()) out.insert(t.text);
  }
  return out;
}

bool ConjunctiveQuery::is_full() const {
  std::set<std::string> h(head.begin(), head.end());
  std::vector<std::string> all = variables();
  return h == std::set<std::string>(all.begin(), all.end());
}

bool ConjunctiveQuery::is_self_join_free() const {
  std::set<std::string> names;
  for (const Atom& a : body) {
    if (!names.insert(a.relation).second) return false;
  }
  return true;
}

bool ConjunctiveQuery::is_connected() const { return component_indices(*this).size() <= 1; }

std::vector<std::string> ConjunctiveQuery::variables() const {
  std::vector<std::string> out;
  for (const Atom& a : body) {
    for (const Term& t : a.terms) {
      if (t.is_variable()) push_unique(out, t.text);
    }
  }
  return out;
}

ConjunctiveQuery parse_query(std::string_view text, const Schema& schema,
                             std::vector<std::string>* warnings) {
  Lexer lex(text);
  ConjunctiveQuery q;
  q.name = lex.identifier();
  lex.expect("(");
  if (!lex.accept(")")) {
    do {
      std::string v = lex.identifier();
      if (std::find(q.head.begin(), q.head.end(), v) != q.head.end()) {
        lex.fail("head variable " + v + " repeated");
      }
      q.head.push_back(std::move(v));
    } while (lex.accept(","));
    lex.expect(")");
  }
  lex.expect(":-");
  do {
    Atom atom;
    atom.relation = lex.identifier();
    lex.expect("(");
    if (!lex.accept(")")) {
      do {
        atom.terms.push_back(lex.term());
      } while (lex.accept(","));
      lex.expect(")");
    }
    const RelationSchema* rel = schema.find(atom.relation);
    if (rel == nullptr) throw Error(ErrorCode::kUnknownRelation, atom.relation);
    if (rel->arity() != atom.terms.size()) {
      throw Error(ErrorCode::kArityMismatch,
                  atom.relation + " expects " + std::to_string(rel->arity()) + " terms, got " +
                      std::to_string(atom.terms.size()));
    }
    atom.key_positions = rel->key_positions;
    atom.attributes = rel->attributes;
    if (std::find(q.body.begin(), q.body.end(), atom) != q.body.end()) {
      if (warnings != nullptr) warnings->push_back("duplicate atom " + print_atom(atom) + " collapsed");
      continue;
    }
    q.body.push_back(std::move(atom));
  } while (lex.accept(","));
  lex.accept(".");
  if (!lex.at_end()) lex.fail("trailing input");

  std::vector<std::string> vars = q.variables();
  for (const std::string& h : q.head) {
    if (std::find(vars.begin(), vars.end(), h) == vars.end()) {
      throw Error(ErrorCode::kUnsafeHead, "head variable " + h + " does not occur in the body");
    }
  }
  return q;
}

ConjunctiveQuery load_query(const std::string& path, const Schema& schema,
                            std::vector<std::string>* warnings) {
  return parse_query(read_file(path), schema, warnings);
}

std::string print_term(const Term& term) {
  if (term.is_variable()) return term.text;
  std::string out = "'";
  for (char c : term.text) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string print_atom(const Atom& atom) {
  std::string out = atom.relation + "(";
  for (std::size_t i = 0; i < atom.terms.size(); ++i) {
    if (i > 0) out += ", ";
    out += print_term(atom.terms[i]);
  }
  return out + ")";
}

std::string print_query(const ConjunctiveQuery& q) {
  std::string out = q.name + "(";
  for (std::size_t i = 0; i < q.head.size(); ++i) {
    if (i > 0) out += ", ";
    out += q.head[i];
  }
  out += ") :- ";
  for (std::size_t i = 0; i < q.body.size(); ++i) {
    if (i > 0) out += ", ";
    out += print_atom(q.body[i]);
  }
  return out + ".";
}

ConjunctiveQuery substitute(const ConjunctiveQuery& q,
                            const std::map<std::string, std::string>& assignment) {
  std::vector<std::string> vars = q.variables();
  for (const auto& [var, value] : assignment) {
    if (std::find(vars.begin(), vars.end(), var) == vars.end()) {
      throw Error(ErrorCode::kUnknownVariable, var + " is not a variable of " + q.name);
    }
  }
  ConjunctiveQuery out = q;
  std::erase_if(out.head, [&](const std::string& h) { return assignment.count(h) > 0; });
  for (Atom& a : out.body) {
    for (Term& t : a.terms) {
      if (!t.is_variable()) continue;
      auto it = assignment.find(t.text);
      if (it != assignment.end()) t = Term::constant(it->second);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> component_indices(const ConjunctiveQuery& q) {
  std::size_t n = q.body.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (shares_variable(q.body[i], q.body[j])) parent[find(j)] = find(i);
    }
  }
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = slot.emplace(find(i), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

ConjunctiveQuery subquery(const ConjunctiveQuery& q, const std::vector<std::size_t>& atoms) {
  ConjunctiveQuery out;
  out.name = q.name;
  std::vector<std::size_t> sorted = atoms;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i : sorted) out.body.push_back(q.body.at(i));
  return out;
}

std::vector<ConjunctiveQuery> connected_components(const ConjunctiveQuery& q) {
  std::vector<ConjunctiveQuery> out;
  for (const auto& group : component_indices(q)) out.push_back(subquery(q, group));
  return out;
}

FrozenQuery freeze_head(const ConjunctiveQuery& q) {
  FrozenQuery f;
  std::map<std::string, std::string> assignment;
  for (const std::string& v : q.head) {
    std::string c = std::string(1, '\0') + v;
    assignment[v] = c;
    f.constant_to_var[c] = v;
  }
  f.var_to_constant = assignment;
  f.query = substitute(q, assignment);
  return f;
}

bool is_frozen_constant(const Term& term) {
  return term.is_constant() && !term.text.empty() && term.text[0] == '\0';
}

}  // namespace lincqa
