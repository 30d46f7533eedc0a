#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lincqa/engine.hpp"
#include "lincqa/query.hpp"

namespace lincqa {

/// A named query bound to its own schema.
struct Fixture {
  std::string id;
  Schema schema;
  ConjunctiveQuery query;
};

/// q1..q7, qex, qnex, company_q, ex43, 2path, 3path.
std::vector<Fixture> suite();
/// Throws kInvalidSpec for an unknown id.
Fixture suite_fixture(const std::string& id);

Schema company_schema();
DatabaseInstance company_database();

/// Seed from LINCQA_SEED when set, else `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

struct SyntheticSpec {
  std::size_t rsize = 1000;
  double inratio = 0.1;
  std::size_t bsize = 2;
  std::uint64_t seed = 0;
  std::string query_id = "q1";
};

/// inratio * rsize / bsize; throws kInvalidSpec unless it is a whole number
/// of blocks that fits into rsize.
std::size_t in_block_num(const SyntheticSpec& spec);

struct RelationStats {
  std::string relation;
  std::size_t rows = 0;
  std::size_t blocks = 0;
  std::size_t inconsistent_blocks = 0;
  std::size_t inconsistent_rows = 0;
};

std::vector<RelationStats> relation_stats(const DatabaseInstance& db);

struct SyntheticInstance {
  DatabaseInstance db;
  std::string manifest_json;
};

/// Consistent core with join values drawn from a pool four times the number
/// of core rows, then bsize-1 extra tuples in in_block_num random blocks of
/// every relation. Throws kInvalidSpec.
SyntheticInstance gen_synthetic(const SyntheticSpec& spec);

struct WorstCaseSpec {
  std::string query = "2path";  // 2path | 3path
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
  std::uint64_t n = 0;
};

/// D(x, y, N) = ([x] x [y]) u {(u, u) : xy+1 <= u <= N}.
std::vector<std::pair<std::uint64_t, std::uint64_t>> worst_case_relation(std::uint64_t x, std::uint64_t y,
                                                                         std::uint64_t n);
/// R = D(a,b,N), S = D(b,c,N) and, for 3path, T = D(c,d,N). Throws kInvalidSpec.
DatabaseInstance gen_worst_case(const WorstCaseSpec& spec);
/// (ab+bc)/2N or (ab+bc+cd)/3N.
double worst_case_inratio(const WorstCaseSpec& spec);

/// Size series at fixed inconsistency shape, N = base * {1, 2, 4, 8}.
std::vector<WorstCaseSpec> worst_case_size_series(const std::string& query, std::uint64_t base = 100000);
/// Inconsistency sweep at fixed N.
std::vector<WorstCaseSpec> worst_case_ratio_series(const std::string& query, std::uint64_t n = 200000);

/// Runs `fn` `runs` times, discards the first, returns the mean of the rest (ms).
double time_avg_ms(const std::function<void()>& fn, int runs = 5);

struct BenchRow {
  std::string query;
  std::uint64_t n = 0;
  std::string mode;  // cqa | possible
  double wall_ms_avg4 = 0;
  std::size_t out_c = 0;
  std::size_t out_p = 0;
  double inratio = 0;
};

/// One cqa row and one possible row per instance.
std::vector<BenchRow> bench(const Fixture& fixture,
                            const std::vector<std::pair<std::uint64_t, const DatabaseInstance*>>& instances,
                            int runs = 5);

/// query,N,mode,wall_ms_avg4,out_c,out_p
std::string bench_csv(const std::vector<BenchRow>& rows);
/// Aligned table plus consecutive cqa time ratios.
std::string bench_text(const std::vector<BenchRow>& rows);

}  // namespace lincqa
