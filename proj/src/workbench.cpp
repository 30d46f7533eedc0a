#include "lincqa/workbench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "lincqa/error.hpp"

namespace lincqa {

namespace {

struct FixtureSource {
  const char* id;
  const char* schema;
  const char* query;
};

constexpr const char* kCompanySchema =
    "Employee(employee_id*, office_city, wfh_city)\n"
    "Manager(office_city*, manager_id, start_year)\n"
    "Contact(office_city*, contact_id)\n";

const std::vector<FixtureSource>& sources() {
  static const std::vector<FixtureSource> list = {
      {"q1", "R1(a1*, a2, a3)\nR3(a1*, a2, a3)\n", "q1(z) :- R1(x, y, z), R3(y, v, w)."},
      {"q2", "R1(a1*, a2, a3)\nR2(a1*, a2, a3)\n", "q2(z, w) :- R1(x, y, z), R2(y, v, w)."},
      {"q3", "R1(a1*, a2, a3)\nR2(a1*, a2, a3)\nR7(a1*, a2, a3)\n",
       "q3(z) :- R1(x, y, z), R2(y, v, w), R7(v, u, d)."},
      {"q4", "R1(a1*, a2, a3)\nR2(a1*, a2, a3)\nR7(a1*, a2, a3)\n",
       "q4(z, d) :- R1(x, y, z), R2(y, v, w), R7(v, u, d)."},
      {"q5", "R1(a1*, a2, a3)\nR8(a1*, a2*, a3)\n", "q5(z) :- R1(x, y, z), R8(y, v, w)."},
      {"q6", "R1(a1*, a2, a3)\nR6(a1*, a2, a3)\nR9(a1*, a2, a3)\n",
       "q6(z) :- R1(x, y, z), R6(t, y, w), R9(x, y, d)."},
      {"q7", "R3(a1*, a2, a3)\nR4(a1*, a2, a3)\nR10(a1*, a2, a3)\n",
       "q7(z) :- R3(x, y, z), R4(y, x, w), R10(x, y, d)."},
      {"qex", kCompanySchema, "qex() :- Employee(x, y, z), Manager(y, x, '2020'), Contact(y, x)."},
      {"qnex", kCompanySchema, "qnex(w) :- Employee(x, y, z), Manager(y, x, w), Contact(y, x)."},
      {"company_q", kCompanySchema, "company_q(x) :- Employee(x, y, z), Manager(y, w, '2020')."},
      {"ex43", "R(a*, b*, c)\nS(a*, b*, c)\nT(a*, b)\n", "ex43() :- R(x, w, y), S(y, w, z), T(w, z)."},
      {"2path", "R(x*, y)\nS(y*, z)\n", "Q2path(x) :- R(x, y), S(y, z)."},
      {"3path", "R(x*, y)\nS(y*, z)\nT(z*, w)\n", "Q3path(x) :- R(x, y), S(y, z), T(z, w)."},
  };
  return list;
}

Fixture build(const FixtureSource& s) {
  Fixture f;
  f.id = s.id;
  f.schema = parse_schema(s.schema);
  f.query = parse_query(s.query, f.schema);
  return f;
}

// Portable bounded draw; mt19937_64 output is fully specified by the
// standard, the distributions are not.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + rng() % (hi - lo + 1);
}

std::vector<std::uint64_t> distinct_sample(std::mt19937_64& rng, std::uint64_t hi, std::size_t count) {
  // Partial Fisher-Yates over [1, hi] with a sparse swap map.
  std::unordered_map<std::uint64_t, std::uint64_t> swapped;
  std::vector<std::uint64_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t j = draw(rng, i, hi - 1);
    auto at = [&](std::uint64_t k) {
      auto it = swapped.find(k);
      return it == swapped.end() ? k : it->second;
    };
    std::uint64_t vi = at(i);
    std::uint64_t vj = at(j);
    swapped[j] = vi;
    out.push_back(vj + 1);
  }
  return out;
}

}  // namespace

std::vector<Fixture> suite() {
  std::vector<Fixture> out;
  for (const auto& s : sources()) out.push_back(build(s));
  return out;
}

Fixture suite_fixture(const std::string& id) {
  for (const auto& s : sources()) {
    if (id == s.id) return build(s);
  }
  throw Error(ErrorCode::kInvalidSpec, "unknown fixture " + id);
}

Schema company_schema() { return parse_schema(kCompanySchema); }

DatabaseInstance company_database() {
  DatabaseInstance db(company_schema());
  db.insert("Employee", {"0011", "Boston", "Boston"});
  db.insert("Employee", {"0011", "Chicago", "New York"});
  db.insert("Employee", {"0011", "Chicago", "Chicago"});
  db.insert("Employee", {"0022", "New York", "New York"});
  db.insert("Employee", {"0022", "Chicago", "Chicago"});
  db.insert("Employee", {"0034", "Boston", "New York"});
  db.insert("Manager", {"Boston", "0011", "2020"});
  db.insert("Manager", {"Boston", "0011", "2021"});
  db.insert("Manager", {"Chicago", "0022", "2020"});
  db.insert("Manager", {"LA", "0034", "2020"});
  db.insert("Manager", {"LA", "0037", "2020"});
  db.insert("Manager", {"New York", "0022", "2020"});
  db.insert("Contact", {"Boston", "0011"});
  db.insert("Contact", {"Boston", "0022"});
  db.insert("Contact", {"Chicago", "0022"});
  db.insert("Contact", {"LA", "0034"});
  db.insert("Contact", {"LA", "0037"});
  db.insert("Contact", {"New York", "0022"});
  return db;
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("LINCQA_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  std::uint64_t v = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') throw Error(ErrorCode::kInvalidSpec, "LINCQA_SEED is not an integer");
  return v;
}

// ---------------------------------------------------------------------------
// Synthetic workload

std::size_t in_block_num(const SyntheticSpec& spec) {
  if (spec.bsize < 2) throw Error(ErrorCode::kInvalidSpec, "bsize must be at least 2");
  if (!(spec.inratio >= 0.0 && spec.inratio <= 1.0)) throw Error(ErrorCode::kInvalidSpec, "inratio outside [0, 1]");
  if (spec.rsize == 0) throw Error(ErrorCode::kInvalidSpec, "rsize must be positive");
  double blocks = spec.inratio * static_cast<double>(spec.rsize) / static_cast<double>(spec.bsize);
  double rounded = std::round(blocks);
  if (std::abs(blocks - rounded) > 1e-9) {
    throw Error(ErrorCode::kInvalidSpec,
                fmt::format("inratio*rsize/bsize = {} is not an integer", blocks));
  }
  auto n = static_cast<std::size_t>(rounded);
  if (n * spec.bsize > spec.rsize) throw Error(ErrorCode::kInvalidSpec, "inconsistent rows exceed rsize");
  return n;
}

std::vector<RelationStats> relation_stats(const DatabaseInstance& db) {
  std::vector<RelationStats> out;
  for (const auto& [name, rel] : db.relations()) {
    RelationStats s;
    s.relation = name;
    s.rows = rel.size();
    s.blocks = rel.block_count();
    for (std::size_t b = 0; b < rel.block_count(); ++b) {
      if (rel.block_size(b) > 1) {
        ++s.inconsistent_blocks;
        s.inconsistent_rows += rel.block_size(b);
      }
    }
    out.push_back(s);
  }
  return out;
}

SyntheticInstance gen_synthetic(const SyntheticSpec& spec) {
  if (spec.query_id.size() != 2 || spec.query_id[0] != 'q' || spec.query_id[1] < '1' || spec.query_id[1] > '7') {
    throw Error(ErrorCode::kInvalidSpec, "synthetic workload covers q1..q7, not " + spec.query_id);
  }
  std::size_t blocks = in_block_num(spec);
  Fixture f = suite_fixture(spec.query_id);
  const ConjunctiveQuery& q = f.query;
  std::size_t core = spec.rsize - blocks * (spec.bsize - 1);
  std::uint64_t pool = 4 * static_cast<std::uint64_t>(core);
  std::uint64_t third = std::max<std::uint64_t>(1, spec.rsize / 10);

  std::map<std::string, int> occurrences;
  for (const Atom& a : q.body) {
    for (const std::string& v : a.vars()) ++occurrences[v];
  }
  auto is_join = [&](const Term& t) { return t.is_variable() && occurrences[t.text] > 1; };

  std::mt19937_64 rng(spec.seed);
  DatabaseInstance db(f.schema);
  for (const Atom& atom : q.body) {
    auto nonkey_value = [&](std::size_t pos) {
      return is_join(atom.terms[pos]) ? draw(rng, 1, pool) : draw(rng, 1, third);
    };
    std::vector<std::vector<std::uint64_t>> rows(core, std::vector<std::uint64_t>(atom.arity()));
    if (atom.key_positions.size() == 1) {
      std::size_t k = atom.key_positions[0];
      std::vector<std::uint64_t> keys = is_join(atom.terms[k]) ? distinct_sample(rng, pool, core)
                                                               : distinct_sample(rng, core, core);
      for (std::size_t r = 0; r < core; ++r) rows[r][k] = keys[r];
    } else {
      std::set<std::vector<std::uint64_t>> seen;
      for (std::size_t r = 0; r < core; ++r) {
        std::vector<std::uint64_t> key;
        do {
          key.clear();
          for (std::size_t k : atom.key_positions) {
            key.push_back(is_join(atom.terms[k]) ? draw(rng, 1, pool) : draw(rng, 1, core));
          }
        } while (!seen.insert(key).second);
        for (std::size_t i = 0; i < key.size(); ++i) rows[r][atom.key_positions[i]] = key[i];
      }
    }
    for (auto& row : rows) {
      for (std::size_t p = 0; p < atom.arity(); ++p) {
        if (!atom.is_key_position(p)) row[p] = nonkey_value(p);
      }
    }
    // Inject inconsistency into `blocks` distinct core keys.
    std::vector<std::uint64_t> picks = distinct_sample(rng, core, blocks);
    std::set<std::vector<std::uint64_t>> present(rows.begin(), rows.end());
    for (std::uint64_t pick : picks) {
      std::vector<std::uint64_t> base = rows[pick - 1];
      for (std::size_t extra = 1; extra < spec.bsize; ++extra) {
        std::vector<std::uint64_t> t = base;
        int attempts = 0;
        do {
          if (++attempts > 10000) {
            throw Error(ErrorCode::kInvalidSpec, "value domains too small for bsize " + std::to_string(spec.bsize));
          }
          for (std::size_t p = 0; p < atom.arity(); ++p) {
            if (!atom.is_key_position(p)) t[p] = nonkey_value(p);
          }
        } while (present.count(t) > 0);
        present.insert(t);
        rows.push_back(std::move(t));
      }
    }
    for (const auto& row : rows) {
      std::vector<std::string> values;
      for (std::uint64_t v : row) values.push_back(std::to_string(v));
      db.insert(atom.relation, values);
    }
  }

  nlohmann::json manifest;
  manifest["query"] = spec.query_id;
  manifest["rsize"] = spec.rsize;
  manifest["inratio"] = spec.inratio;
  manifest["bsize"] = spec.bsize;
  manifest["seed"] = spec.seed;
  manifest["rng"] = "mt19937_64";
  manifest["in_block_num"] = blocks;
  manifest["join_pool"] = pool;
  manifest["third_attribute_range"] = third;
  nlohmann::json rels = nlohmann::json::array();
  for (const RelationStats& s : relation_stats(db)) {
    rels.push_back({{"relation", s.relation},
                    {"rows", s.rows},
                    {"blocks", s.blocks},
                    {"inconsistent_blocks", s.inconsistent_blocks},
                    {"inconsistent_rows", s.inconsistent_rows}});
  }
  manifest["relations"] = rels;
  return {std::move(db), manifest.dump(2) + "\n"};
}

// ---------------------------------------------------------------------------
// Worst-case instances

std::vector<std::pair<std::uint64_t, std::uint64_t>> worst_case_relation(std::uint64_t x, std::uint64_t y,
                                                                         std::uint64_t n) {
  if (x == 0 || y == 0 || n == 0 || x * y > n) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("D({}, {}, {}) needs positive values and xy <= N", x, y, n));
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(n);
  for (std::uint64_t i = 1; i <= x; ++i) {
    for (std::uint64_t j = 1; j <= y; ++j) out.emplace_back(i, j);
  }
  for (std::uint64_t u = x * y + 1; u <= n; ++u) out.emplace_back(u, u);
  return out;
}

DatabaseInstance gen_worst_case(const WorstCaseSpec& spec) {
  if (spec.query != "2path" && spec.query != "3path") {
    throw Error(ErrorCode::kInvalidSpec, "worst-case query must be 2path or 3path");
  }
  Fixture f = suite_fixture(spec.query);
  std::vector<std::pair<std::string, std::array<std::uint64_t, 2>>> parts = {{"R", {spec.a, spec.b}},
                                                                             {"S", {spec.b, spec.c}}};
  if (spec.query == "3path") parts.push_back({"T", {spec.c, spec.d}});
  DatabaseInstance db(f.schema);
  for (const auto& [name, xy] : parts) {
    for (const auto& [u, v] : worst_case_relation(xy[0], xy[1], spec.n)) {
      db.insert(name, {std::to_string(u), std::to_string(v)});
    }
  }
  return db;
}

double worst_case_inratio(const WorstCaseSpec& spec) {
  double n = static_cast<double>(spec.n);
  if (spec.query == "3path") {
    return static_cast<double>(spec.a * spec.b + spec.b * spec.c + spec.c * spec.d) / (3 * n);
  }
  return static_cast<double>(spec.a * spec.b + spec.b * spec.c) / (2 * n);
}

std::vector<WorstCaseSpec> worst_case_size_series(const std::string& query, std::uint64_t base) {
  // Shapes keep inratio at 36.8% (2path) and 1.44% (3path) for N a multiple of 10^5.
  std::vector<WorstCaseSpec> out;
  for (std::uint64_t m : {1, 2, 4, 8}) {
    WorstCaseSpec s;
    s.query = query;
    s.n = base * m;
    if (query == "2path") {
      s.b = s.c = 80;
      s.a = static_cast<std::uint64_t>(std::llround((0.736 * static_cast<double>(s.n) - 6400.0) / 80.0));
    } else if (query == "3path") {
      s.b = s.c = s.d = 12;
      s.a = static_cast<std::uint64_t>(std::llround((0.0432 * static_cast<double>(s.n) - 288.0) / 12.0));
    } else {
      throw Error(ErrorCode::kInvalidSpec, "worst-case query must be 2path or 3path");
    }
    out.push_back(s);
  }
  return out;
}

std::vector<WorstCaseSpec> worst_case_ratio_series(const std::string& query, std::uint64_t n) {
  std::vector<WorstCaseSpec> out;
  if (query == "2path") {
    for (std::uint64_t a = 50; a <= 500; a += 90) out.push_back({query, a, 360, 360, 0, n});
  } else if (query == "3path") {
    for (std::uint64_t a = 200; a <= 8000; a += 1560) out.push_back({query, a, 24, 24, 24, n});
  } else {
    throw Error(ErrorCode::kInvalidSpec, "worst-case query must be 2path or 3path");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarks

double time_avg_ms(const std::function<void()>& fn, int runs) {
  using Clock = std::chrono::steady_clock;
  double total = 0;
  for (int i = 0; i < runs; ++i) {
    auto start = Clock::now();
    fn();
    double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (i > 0) total += ms;
  }
  return runs > 1 ? total / (runs - 1) : total;
}

std::vector<BenchRow> bench(const Fixture& fixture,
                            const std::vector<std::pair<std::uint64_t, const DatabaseInstance*>>& instances,
                            int runs) {
  std::vector<BenchRow> out;
  for (const auto& [n, db] : instances) {
    AnswerSet cons;
    AnswerSet poss;
    double cqa_ms = time_avg_ms([&] { cons = consistent_answers(fixture.query, *db); }, runs);
    double poss_ms = time_avg_ms([&] { poss = eval_query(fixture.query, *db); }, runs);
    double inconsistent = 0;
    double total = 0;
    for (const RelationStats& s : relation_stats(*db)) {
      inconsistent += static_cast<double>(s.inconsistent_rows);
      total += static_cast<double>(s.rows);
    }
    double ratio = total > 0 ? inconsistent / total : 0;
    out.push_back({fixture.id, n, "cqa", cqa_ms, cons.size(), poss.size(), ratio});
    out.push_back({fixture.id, n, "possible", poss_ms, cons.size(), poss.size(), ratio});
  }
  return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "query,N,mode,wall_ms_avg4,out_c,out_p\n";
  for (const BenchRow& r : rows) {
    out += fmt::format("{},{},{},{:.3f},{},{}\n", r.query, r.n, r.mode, r.wall_ms_avg4, r.out_c, r.out_p);
  }
  return out;
}

std::string bench_text(const std::vector<BenchRow>& rows) {
  std::string out = fmt::format("{:<10} {:>9} {:>9} {:>9} {:>12} {:>9} {:>9} {:>7}\n", "query", "N", "inratio",
                                "mode", "wall_ms", "out_c", "out_p", "ratio");
  const BenchRow* prev = nullptr;
  for (const BenchRow& r : rows) {
    std::string ratio = "-";
    if (r.mode == "cqa") {
      if (prev != nullptr && prev->wall_ms_avg4 > 0) ratio = fmt::format("{:.2f}", r.wall_ms_avg4 / prev->wall_ms_avg4);
      prev = &r;
    }
    out += fmt::format("{:<10} {:>9} {:>8.2f}% {:>9} {:>12.3f} {:>9} {:>9} {:>7}\n", r.query, r.n, 100 * r.inratio,
                       r.mode, r.wall_ms_avg4, r.out_c, r.out_p, ratio);
  }
  return out;
}

}  // namespace lincqa
