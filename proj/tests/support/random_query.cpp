#include <algorithm>
#include <set>

#include "support.hpp"

namespace lincqa::testkit {

Fixture random_query(std::mt19937_64& rng, const QueryShape& shape) {
  static const char* kVars[] = {"x", "y", "z", "u", "v", "w"};
  std::size_t atoms = 1 + rng() % shape.max_atoms;
  std::size_t pool = std::min<std::size_t>(shape.variables, 6);
  Fixture f;
  f.id = "random";
  f.query.name = "qr";
  for (std::size_t i = 0; i < atoms; ++i) {
    RelationSchema rs;
    rs.name = "T" + std::to_string(i);
    std::size_t arity = 1 + rng() % shape.max_arity;
    for (std::size_t p = 0; p < arity; ++p) rs.attributes.push_back("c" + std::to_string(p));
    std::size_t key = 1 + rng() % arity;
    for (std::size_t p = 0; p < key; ++p) rs.key_positions.push_back(p);
    f.schema.add(rs);

    Atom a;
    a.relation = rs.name;
    a.attributes = rs.attributes;
    a.key_positions = rs.key_positions;
    for (std::size_t p = 0; p < arity; ++p) {
      if (rng() % 100 < shape.constant_percent) {
        a.terms.push_back(Term::constant(std::to_string(1 + rng() % 2)));
      } else {
        a.terms.push_back(Term::variable(kVars[rng() % pool]));
      }
    }
    f.query.body.push_back(std::move(a));
  }
  if (shape.free_variables) {
    for (const std::string& v : f.query.variables()) {
      if (rng() % 3 == 0) f.query.head.push_back(v);
    }
  }
  return f;
}

}  // namespace lincqa::testkit
