// Command-line front end: analyze, rewrite, run, check, gen, bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lincqa/attack.hpp"
#include "lincqa/engine.hpp"
#include "lincqa/error.hpp"
#include "lincqa/hypergraph.hpp"
#include "lincqa/query.hpp"
#include "lincqa/rewriting.hpp"
#include "lincqa/workbench.hpp"

namespace fs = std::filesystem;
using namespace lincqa;

namespace {

struct QueryArgs {
  std::string query;
  std::string schema;
};

// --query is a suite id, a file, or inline text; --schema is a file and may
// be omitted for suite ids.
Fixture resolve(const QueryArgs& args) {
  bool is_file = fs::is_regular_file(args.query);
  bool inline_text = !is_file && args.query.find(":-") != std::string::npos;
  if (!is_file && !inline_text && args.schema.empty()) return suite_fixture(args.query);
  if (args.schema.empty()) throw Error(ErrorCode::kMissingFile, "--schema is required for " + args.query);
  Fixture f;
  f.schema = load_schema(args.schema);
  std::vector<std::string> warnings;
  f.query = is_file ? load_query(args.query, f.schema, &warnings) : parse_query(args.query, f.schema, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  f.id = f.query.name;
  return f;
}

void add_query_options(CLI::App* cmd, QueryArgs& args) {
  cmd->add_option("--query", args.query, "suite id, query file, or query text")->required();
  cmd->add_option("--schema", args.schema, "schema file");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kMissingFile, "cannot write " + path.string());
  out << text;
}

int cmd_analyze(const QueryArgs& args, bool dot) {
  Fixture f = resolve(args);
  const ConjunctiveQuery& q = f.query;
  std::cout << "query: " << print_query(q) << "\n";
  std::cout << "atoms: " << q.body.size() << ", boolean: " << (q.is_boolean() ? "yes" : "no")
            << ", connected: " << (q.is_connected() ? "yes" : "no") << "\n";
  AttackGraph g = attack_graph(q);
  std::cout << "attack graph: " << (g.is_acyclic() ? "acyclic" : "cyclic") << "\n";
  for (auto [a, b] : g.edges()) {
    std::cout << "  " << q.body[a].relation << " -> " << q.body[b].relation << "\n";
  }
  std::cout << "c-forest: " << (is_cforest(q) ? "yes" : "no") << "\n";
  FastPpjtResult fast = find_ppjt_fast(q);
  const char* fast_status = fast.status == FastPpjtResult::Status::kFound         ? "found"
                            : fast.status == FastPpjtResult::Status::kNoPpjt      ? "no ppjt"
                                                                                  : "not applicable";
  std::cout << "fast search: " << fast_status << "\n";
  std::optional<PpjtCertificate> cert = find_ppjt(q);
  if (!cert) {
    std::cout << "ppjt: none\n";
    return 0;
  }
  std::cout << "ppjt: rooted at " << q.body[cert->tree.root].relation << "\n";
  std::cout << (dot ? to_dot(q, cert->tree) : to_text(q, cert->tree));
  return 0;
}

int cmd_rewrite(const QueryArgs& args, const std::string& format, const std::string& ground) {
  Fixture f = resolve(args);
  GroundMode mode = ground == "naive" ? GroundMode::kNaive : GroundMode::kStar;
  RewriteProgram p = rewrite(f.query, mode);
  std::cout << (format == "sql" ? render_sql(p, f.schema) : render_datalog(p));
  return 0;
}

int cmd_run(const QueryArgs& args, const std::string& data, const std::string& mode, const std::string& strategy) {
  Fixture f = resolve(args);
  DatabaseInstance db = load_csv(data, f.schema);
  AnswerSet out;
  if (mode == "possible") {
    out = eval_query(f.query, db);
  } else if (mode == "oracle") {
    out = oracle_consistent_answers(f.query, db);
  } else {
    CqaOptions opts;
    if (strategy == "per-answer") opts.strategy = Strategy::kPerAnswer;
    out = consistent_answers(f.query, db, opts);
  }
  if (f.query.is_boolean()) {
    std::cout << (out.truth() ? "true" : "false") << "\n";
  } else {
    out.columns = f.query.head;
    std::cout << out.to_csv();
  }
  return 0;
}

std::string fmt_tuple(const std::vector<std::string>& t) {
  std::string out = "(";
  for (std::size_t i = 0; i < t.size(); ++i) out += (i > 0 ? ", " : "") + t[i];
  return out + ")";
}

int cmd_check(const QueryArgs& args, const std::string& data) {
  Fixture f = resolve(args);
  DatabaseInstance db = load_csv(data, f.schema);
  AnswerSet cqa = consistent_answers(f.query, db);
  AnswerSet oracle = oracle_consistent_answers(f.query, db);
  std::cout << "repairs: " << count_repairs(db, &f.query) << "\n";
  std::cout << "consistent answers: " << cqa.size() << ", oracle: " << oracle.size() << "\n";
  if (cqa == oracle) {
    std::cout << "match\n";
    return 0;
  }
  std::cout << "MISMATCH\n";
  for (const auto& t : cqa.tuples()) {
    if (!oracle.contains(t)) std::cout << "  only rewriting: " << fmt_tuple(t) << "\n";
  }
  for (const auto& t : oracle.tuples()) {
    if (!cqa.contains(t)) std::cout << "  only oracle: " << fmt_tuple(t) << "\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistent query answering under primary keys"};
  app.require_subcommand(1);

  QueryArgs qargs;
  bool dot = false;
  auto* analyze = app.add_subcommand("analyze", "join trees, attack graph, PPJT");
  add_query_options(analyze, qargs);
  analyze->add_flag("--dot", dot, "print the PPJT in DOT");

  std::string format = "datalog";
  std::string ground = "star";
  auto* rewrite_cmd = app.add_subcommand("rewrite", "print the rewriting");
  add_query_options(rewrite_cmd, qargs);
  rewrite_cmd->add_option("--format", format)->check(CLI::IsMember({"sql", "datalog"}));
  rewrite_cmd->add_option("--ground", ground)->check(CLI::IsMember({"star", "naive"}));

  std::string data;
  std::string mode = "cqa";
  std::string strategy = "program";
  auto* run = app.add_subcommand("run", "evaluate over CSV data");
  add_query_options(run, qargs);
  run->add_option("--data", data, "directory of <Relation>.csv")->required();
  run->add_option("--mode", mode)->check(CLI::IsMember({"cqa", "possible", "oracle"}));
  run->add_option("--strategy", strategy)->check(CLI::IsMember({"program", "per-answer"}));

  auto* check = app.add_subcommand("check", "compare against the repair oracle");
  add_query_options(check, qargs);
  check->add_option("--data", data)->required();

  auto* gen = app.add_subcommand("gen", "generate instances");
  gen->require_subcommand(1);
  SyntheticSpec sspec;
  std::string out_dir;
  auto* gen_syn = gen->add_subcommand("synthetic", "q1..q7 workload");
  gen_syn->add_option("--query", sspec.query_id)->required();
  gen_syn->add_option("--rsize", sspec.rsize)->required();
  gen_syn->add_option("--inratio", sspec.inratio)->required();
  gen_syn->add_option("--bsize", sspec.bsize)->required();
  gen_syn->add_option("--seed", sspec.seed);
  gen_syn->add_option("--out", out_dir)->required();
  WorstCaseSpec wspec;
  auto* gen_worst = gen->add_subcommand("worst", "D(x,y,N) instances");
  gen_worst->add_option("--query", wspec.query)->required()->check(CLI::IsMember({"2path", "3path"}));
  gen_worst->add_option("--a", wspec.a)->required();
  gen_worst->add_option("--b", wspec.b)->required();
  gen_worst->add_option("--c", wspec.c)->required();
  gen_worst->add_option("--d", wspec.d);
  gen_worst->add_option("--n", wspec.n)->required();
  gen_worst->add_option("--out", out_dir)->required();

  std::string bench_query;
  std::string series = "size";
  std::uint64_t base = 100000;
  int runs = 5;
  std::string csv_path;
  auto* bench_cmd = app.add_subcommand("bench", "timed runs over an instance series");
  bench_cmd->add_option("--query", bench_query)->required();
  bench_cmd->add_option("--series", series)->check(CLI::IsMember({"size", "ratio"}));
  bench_cmd->add_option("--base", base, "N of the first instance");
  bench_cmd->add_option("--runs", runs);
  bench_cmd->add_option("--csv", csv_path, "also write the CSV report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return cmd_analyze(qargs, dot);
    if (*rewrite_cmd) return cmd_rewrite(qargs, format, ground);
    if (*run) return cmd_run(qargs, data, mode, strategy);
    if (*check) return cmd_check(qargs, data);
    if (*gen_syn) {
      if (gen_syn->count("--seed") == 0) sspec.seed = seed_from_env(0);
      SyntheticInstance inst = gen_synthetic(sspec);
      fs::create_directories(out_dir);
      write_csv(inst.db, out_dir);
      write_file(fs::path(out_dir) / "schema.txt", print_schema(inst.db.schema()));
      write_file(fs::path(out_dir) / "manifest.json", inst.manifest_json);
      std::cout << inst.manifest_json;
      return 0;
    }
    if (*gen_worst) {
      DatabaseInstance db = gen_worst_case(wspec);
      fs::create_directories(out_dir);
      write_csv(db, out_dir);
      write_file(fs::path(out_dir) / "schema.txt", print_schema(db.schema()));
      std::printf("inratio %.4f\n", worst_case_inratio(wspec));
      return 0;
    }
    if (*bench_cmd) {
      Fixture f = suite_fixture(bench_query);
      std::vector<DatabaseInstance> dbs;
      std::vector<std::uint64_t> ns;
      if (bench_query == "2path" || bench_query == "3path") {
        auto specs = series == "size" ? worst_case_size_series(bench_query, base)
                                      : worst_case_ratio_series(bench_query, base * 2);
        for (const auto& s : specs) {
          dbs.push_back(gen_worst_case(s));
          ns.push_back(s.n);
        }
      } else {
        for (std::uint64_t m : {1, 2, 4, 8}) {
          SyntheticSpec s{base * m, 0.1, 2, seed_from_env(7), bench_query};
          dbs.push_back(gen_synthetic(s).db);
          ns.push_back(s.rsize);
        }
      }
      std::vector<std::pair<std::uint64_t, const DatabaseInstance*>> inst;
      for (std::size_t i = 0; i < dbs.size(); ++i) inst.emplace_back(ns[i], &dbs[i]);
      std::vector<BenchRow> rows = bench(f, inst, runs);
      std::cout << bench_text(rows);
      if (!csv_path.empty()) write_file(csv_path, bench_csv(rows));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
