#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "lincqa/engine.hpp"
#include "lincqa/rewriting.hpp"
#include "lincqa/workbench.hpp"

namespace lincqa::testkit {

/// Shape of a random oracle-scale instance.
struct RandomShape {
  std::size_t max_rows = 30;       // across all relations of the query
  std::size_t max_block = 3;
  std::size_t domain = 4;          // values "1".."domain" plus the query's constants
};

/// Random instance over the query's relations. Keys and values come from a
/// small domain so joins and conflicts are frequent.
DatabaseInstance random_instance(const Fixture& f, std::mt19937_64& rng, const RandomShape& shape = {});

/// Same, but every block is a singleton.
DatabaseInstance random_consistent_instance(const Fixture& f, std::mt19937_64& rng, const RandomShape& shape = {});

struct QueryShape {
  std::size_t max_atoms = 4;
  std::size_t max_arity = 3;
  std::size_t variables = 4;
  unsigned constant_percent = 10;
  bool free_variables = false;
};

/// Self-join-free query over a fresh schema T0, T1, ... whose keys are
/// prefixes. Not necessarily acyclic or connected.
Fixture random_query(std::mt19937_64& rng, const QueryShape& shape = {});

/// Reads the text produced by render_datalog.
RewriteProgram read_datalog(const std::string& text);

/// Loads db into an in-memory SQLite database, runs `sql`, and collects the
/// distinct result rows. Boolean programs yield the empty tuple when any
/// row comes back.
AnswerSet run_sql(const std::string& sql, const DatabaseInstance& db, bool boolean);

}  // namespace lincqa::testkit
