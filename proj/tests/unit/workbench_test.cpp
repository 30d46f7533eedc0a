#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lincqa/engine.hpp"
#include "lincqa/error.hpp"
#include "lincqa/workbench.hpp"

using namespace lincqa;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kSyntaxError;
}

std::string slurp_dir(const fs::path& dir) {
  std::string out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    out += p.filename().string() + "\n" + ss.str();
  }
  return out;
}

std::string csv_bytes(const DatabaseInstance& db, const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("lincqa_wb_" + std::to_string(::getpid()) + "_" + tag);
  fs::create_directories(dir);
  write_csv(db, dir.string());
  std::string out = slurp_dir(dir);
  fs::remove_all(dir);
  return out;
}

}  // namespace

TEST(Suite, Fixtures) {
  std::vector<Fixture> s = suite();
  EXPECT_EQ(s.size(), 13u);
  std::set<std::string> ids;
  for (const Fixture& f : s) ids.insert(f.id);
  EXPECT_EQ(ids.size(), 13u);
  EXPECT_EQ(suite_fixture("q5").schema.at("R8").key_positions, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(print_query(suite_fixture("2path").query), "Q2path(x) :- R(x, y), S(y, z).");
  EXPECT_EQ(code_of([] { suite_fixture("q99"); }), ErrorCode::kInvalidSpec);
}

TEST(Suite, CompanyDatabase) {
  DatabaseInstance db = company_database();
  EXPECT_EQ(db.schema(), company_schema());
  EXPECT_EQ(db.at("Employee").size(), 6u);
  EXPECT_EQ(db.at("Manager").size(), 6u);
  EXPECT_EQ(db.at("Contact").size(), 6u);
}

TEST(Seed, EnvironmentOverride) {
  ::unsetenv("LINCQA_SEED");
  EXPECT_EQ(seed_from_env(9), 9u);
  ::setenv("LINCQA_SEED", "1234", 1);
  EXPECT_EQ(seed_from_env(9), 1234u);
  ::unsetenv("LINCQA_SEED");
}

TEST(Synthetic, InjectsTheRequestedBlocks) {
  SyntheticSpec spec;
  spec.rsize = 1000;
  spec.inratio = 0.1;
  spec.bsize = 2;
  spec.seed = 7;
  for (int i = 1; i <= 7; ++i) {
    spec.query_id = "q" + std::to_string(i);
    EXPECT_EQ(in_block_num(spec), 50u);
    SyntheticInstance inst = gen_synthetic(spec);
    for (const RelationStats& r : relation_stats(inst.db)) {
      EXPECT_EQ(r.rows, 1000u) << spec.query_id << " " << r.relation;
      EXPECT_EQ(r.inconsistent_blocks, 50u) << spec.query_id << " " << r.relation;
      EXPECT_EQ(r.inconsistent_rows, 100u) << spec.query_id << " " << r.relation;
      EXPECT_EQ(r.blocks, 950u) << spec.query_id << " " << r.relation;
    }
    EXPECT_NE(inst.manifest_json.find("\"inratio\""), std::string::npos);
  }
}

TEST(Synthetic, CoreMatchRate) {
  // Roughly a quarter of R1's y values find a partner in R3.
  SyntheticSpec spec;
  spec.rsize = 4000;
  spec.inratio = 0;
  spec.seed = 3;
  DatabaseInstance db = gen_synthetic(spec).db;
  const Relation& r1 = db.at("R1");
  const Relation& r3 = db.at("R3");
  std::set<ValueId> keys;
  for (std::size_t i = 0; i < r3.size(); ++i) keys.insert(r3.row(i)[0]);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) hit += keys.count(r1.row(i)[1]);
  double rate = static_cast<double>(hit) / static_cast<double>(r1.size());
  EXPECT_GT(rate, 0.15);
  EXPECT_LT(rate, 0.35);
}

TEST(Synthetic, ZeroRatioIsConsistent) {
  SyntheticSpec spec;
  spec.inratio = 0;
  SyntheticInstance inst = gen_synthetic(spec);
  EXPECT_TRUE(inst.db.is_consistent());
  EXPECT_EQ(count_repairs(inst.db), 1u);
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec bad;
  bad.bsize = 3;  // 100 / 3 is not whole
  EXPECT_EQ(code_of([&] { gen_synthetic(bad); }), ErrorCode::kInvalidSpec);
  SyntheticSpec one;
  one.bsize = 1;
  EXPECT_EQ(code_of([&] { gen_synthetic(one); }), ErrorCode::kInvalidSpec);
  SyntheticSpec ratio;
  ratio.inratio = 1.5;
  EXPECT_EQ(code_of([&] { gen_synthetic(ratio); }), ErrorCode::kInvalidSpec);
  SyntheticSpec query;
  query.query_id = "qex";
  EXPECT_EQ(code_of([&] { gen_synthetic(query); }), ErrorCode::kInvalidSpec);
}

TEST(Synthetic, DeterministicUnderSeed) {
  SyntheticSpec spec;
  spec.rsize = 500;
  spec.seed = 11;
  spec.query_id = "q6";
  std::string a = csv_bytes(gen_synthetic(spec).db, "a");
  std::string b = csv_bytes(gen_synthetic(spec).db, "b");
  EXPECT_EQ(a, b);
  spec.seed = 12;
  EXPECT_NE(csv_bytes(gen_synthetic(spec).db, "c"), a);
}

TEST(Synthetic, OracleScaleInstanceMatchesTheOracle) {
  Fixture q1 = suite_fixture("q1");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.rsize = 30;
    spec.bsize = 3;
    spec.inratio = 0.2;
    spec.seed = seed;
    DatabaseInstance db = gen_synthetic(spec).db;
    for (const RelationStats& r : relation_stats(db)) EXPECT_EQ(r.inconsistent_blocks, 2u);
    // 3^4 repairs across R1 and R3.
    EXPECT_EQ(count_repairs(db, &q1.query), 81u);
    EXPECT_EQ(consistent_answers(q1.query, db), oracle_consistent_answers(q1.query, db));
  }
}

TEST(WorstCase, SmallRelation) {
  using P = std::pair<std::uint64_t, std::uint64_t>;
  EXPECT_EQ(worst_case_relation(2, 2, 5), (std::vector<P>{{1, 1}, {1, 2}, {2, 1}, {2, 2}, {5, 5}}));
  EXPECT_EQ(worst_case_relation(1, 1, 1), (std::vector<P>{{1, 1}}));
}

TEST(WorstCase, InconsistencyRatioAndBlocks) {
  WorstCaseSpec spec{"2path", 120, 800, 800, 0, 1000000};
  EXPECT_NEAR(worst_case_inratio(spec), 0.368, 1e-9);
  DatabaseInstance db = gen_worst_case(spec);
  const Relation& r = db.at("R");
  EXPECT_EQ(r.size(), 1000000u);
  for (std::size_t b = 0; b < r.block_count(); ++b) {
    std::uint64_t key = std::stoull(db.dictionary().value(r.block_keys().row(b)[0]));
    EXPECT_EQ(r.block_size(b), key <= 120 ? 800u : 1u);
  }
  std::vector<RelationStats> st = relation_stats(db);
  double inconsistent = 0;
  for (const RelationStats& s : st) inconsistent += static_cast<double>(s.inconsistent_rows);
  // Rows of size-one blocks among [a]x[b] do not exist here, so the closed form is exact.
  EXPECT_NEAR(inconsistent / (2.0 * 1000000), 0.368, 1e-9);

  WorstCaseSpec three{"3path", 10, 4, 4, 4, 100};
  EXPECT_NEAR(worst_case_inratio(three), (40.0 + 16 + 16) / 300, 1e-12);
  EXPECT_EQ(gen_worst_case(three).relations().size(), 3u);
}

TEST(WorstCase, RejectsBadSpecs) {
  EXPECT_EQ(code_of([] { gen_worst_case({"2path", 10, 10, 10, 0, 50}); }), ErrorCode::kInvalidSpec);
  EXPECT_EQ(code_of([] { gen_worst_case({"4path", 1, 1, 1, 1, 50}); }), ErrorCode::kInvalidSpec);
}

TEST(WorstCase, Series) {
  for (const std::string q : {"2path", "3path"}) {
    std::vector<WorstCaseSpec> s = worst_case_size_series(q, 100000);
    ASSERT_EQ(s.size(), 4u);
    for (std::size_t i = 1; i < s.size(); ++i) {
      EXPECT_EQ(s[i].n, 2 * s[i - 1].n);
      EXPECT_NEAR(worst_case_inratio(s[i]), worst_case_inratio(s[0]), 0.002);
    }
    std::vector<WorstCaseSpec> r = worst_case_ratio_series(q, 200000);
    EXPECT_GE(r.size(), 4u);
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GT(worst_case_inratio(r[i]), worst_case_inratio(r[i - 1]));
  }
}

TEST(Bench, RowsAndCsv) {
  Fixture f = suite_fixture("2path");
  std::vector<WorstCaseSpec> specs = {{"2path", 5, 5, 5, 0, 200}, {"2path", 10, 5, 5, 0, 400}};
  std::vector<DatabaseInstance> dbs;
  for (const auto& s : specs) dbs.push_back(gen_worst_case(s));
  std::vector<std::pair<std::uint64_t, const DatabaseInstance*>> inst = {{200, &dbs[0]}, {400, &dbs[1]}};
  std::vector<BenchRow> rows = bench(f, inst, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (const BenchRow& r : rows) EXPECT_LE(r.out_c, r.out_p);
  EXPECT_EQ(rows[0].mode, "cqa");
  EXPECT_EQ(rows[1].mode, "possible");
  std::string csv = bench_csv(rows);
  EXPECT_EQ(csv.rfind("query,N,mode,wall_ms_avg4,out_c,out_p\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(bench_text(rows).find("ratio"), std::string::npos);
}

TEST(Bench, TimeAverageDropsTheFirstRun) {
  int calls = 0;
  double ms = time_avg_ms([&] { ++calls; }, 5);
  EXPECT_EQ(calls, 5);
  EXPECT_GE(ms, 0.0);
}
