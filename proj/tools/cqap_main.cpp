#include "cqap/analysis.hpp"
#include "cqap/database.hpp"
#include "cqap/engine.hpp"
#include "cqap/errors.hpp"
#include "cqap/join.hpp"
#include "cqap/proofseq.hpp"
#include "cqap/workload.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace cqap;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitResource = 3;
constexpr int kExitConfig = 4;

struct Options {
  std::string query;
  std::string data;
  std::string budget = "N";
  std::string budgets = "0.5,1,1.5";
  std::string store;
  std::string requests;
  std::string out;
  std::string catalog;
  std::string format = "text";
  std::string mode = "auto";
  std::string counters;
  std::string proof;
  int max_bag = 0;
  int jobs = 1;
  int trials = 100;
  std::size_t rows = 1000;
  std::uint64_t seed = 1;
  bool batch = false;
  bool emit_pmtds = false;
  bool emit_rules = false;
};

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << text;
}

std::vector<Pmtd> pmtds_for(const Cqap& q, int max_bag) { return query_pmtds(q, max_bag > 0 ? max_bag : q.n()); }

// "N^1.5", "N", or a tuple count.
double parse_budget(const std::string& s, const Database& db) {
  const double n = static_cast<double>(std::max<std::size_t>(2, db.max_table_size()));
  if (s == "N") return n;
  if (s.rfind("N^", 0) == 0) return std::pow(n, std::stod(s.substr(2)));
  double v = std::stod(s);
  if (!(v > 0)) throw InvalidArgument("budget must be positive: " + s);
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  if (out.empty()) throw InvalidArgument("empty budget list");
  return out;
}

int cmd_analyze(const Options& o) {
  auto q = load_query(o.query);
  AnalyzeOptions opt;
  opt.max_bag = o.max_bag;
  if (!o.catalog.empty()) opt.catalog = read_catalog(o.catalog);
  auto report = analyze_query(q, opt);
  for (const auto& r : report.rules)
    if (r.unbounded) std::cerr << "warning: rule " << rule_label(r.rule, q) << " is unbounded\n";
  if (o.emit_pmtds) {
    auto j = nlohmann::json::array();
    for (const auto& p : report.pmtds) j.push_back(pmtd_to_json(p, q));
    write_out(o.out, j.dump(2) + "\n");
  } else if (o.emit_rules) {
    auto j = nlohmann::json::array();
    for (const auto& r : report.rules) j.push_back(rule_to_json(r.rule, q));
    write_out(o.out, j.dump(2) + "\n");
  } else if (o.format == "json") {
    write_out(o.out, report_json(report, q).dump(2) + "\n");
  } else {
    write_out(o.out, report_text(report, q));
  }
  return 0;
}

std::unique_ptr<PreprocessedStore> build_store(const Cqap& q, const Database& db, double budget, const Options& o) {
  auto pmtds = pmtds_for(q, o.max_bag);
  auto rules = prune_rules(generate_rules(pmtds));
  auto plans = plan_rules(q, rules, budget_units(db, budget));
  EngineConfig cfg;
  cfg.mode = bucket_mode_from_name(o.mode);
  cfg.jobs = o.jobs;
  return preprocess(db, q, pmtds, plans, budget, cfg);
}

int cmd_preprocess(const Options& o) {
  auto q = load_query(o.query);
  auto db = load_database(o.data);
  auto store = build_store(q, db, parse_budget(o.budget, db), o);
  save_store(*store, db, o.out);
  std::cout << store->manifest()["space"].dump() << "\n";
  return 0;
}

std::vector<Relation> request_list(const Relation& all, bool batch) {
  if (all.empty()) return {};
  if (batch) return {all};
  std::vector<Relation> out;
  for (const auto& row : all.rows()) out.emplace_back("Q", all.schema(), std::vector<Tuple>{row});
  return out;
}

int cmd_answer(const Options& o) {
  auto q = load_query(o.query);
  auto db = load_database(o.data);
  auto store = load_store(o.store, db, q);
  auto requests = read_requests_tsv(o.requests, q, db.dict);
  Relation result("answer", q.head);
  OpCounters total;
  std::uint64_t max_scans = 0;
  std::size_t count = 0;
  for (const auto& r : request_list(requests, o.batch)) {
    auto a = answer(*store, r);
    result = union_of(result, a.answer);
    total += a.counters;
    max_scans = std::max(max_scans, a.counters.tuples_scanned);
    ++count;
  }
  write_out(o.out, requests.empty() ? std::string() : format_relation(result, q, db.dict));
  auto cj = counters_to_json(total);
  cj["requests"] = count;
  cj["max_tuples_scanned"] = max_scans;
  if (o.counters.empty())
    std::cerr << cj.dump() << "\n";
  else
    write_out(o.counters, cj.dump(2) + "\n");
  return 0;
}

int cmd_oracle(const Options& o) {
  auto q = load_query(o.query);
  auto db = load_database(o.data);
  auto atoms = bind_atoms(db, q);
  auto requests = read_requests_tsv(o.requests, q, db.dict);
  Relation result("answer", q.head);
  for (const auto& r : request_list(requests, o.batch)) result = union_of(result, oracle_answer(atoms, q, r));
  write_out(o.out, requests.empty() ? std::string() : format_relation(result, q, db.dict));
  return 0;
}

int cmd_bench(const Options& o) {
  auto q = load_query(o.query);
  auto db = o.data.empty() ? random_database(q, o.rows, o.seed) : load_database(o.data);
  auto atoms = bind_atoms(db, q);
  AnalyzeOptions aopt;
  aopt.max_bag = o.max_bag;
  auto curve = analyze_query(q, aopt).envelope;
  const double n = static_cast<double>(std::max<std::size_t>(2, db.max_table_size()));
  auto requests = random_requests(q, atoms, static_cast<std::size_t>(o.trials), o.seed + 1);
  std::ostringstream csv;
  csv << "log_s,budget,stored_tuples,materialized,max_scans,mean_scans,predicted_log_t,predicted_scans\n";
  for (double e : parse_list(o.budgets)) {
    const double budget = std::pow(n, e);
    auto store = build_store(q, db, budget, o);
    std::uint64_t max_scans = 0, sum = 0;
    for (const auto& r : requests) {
      auto a = answer(*store, r);
      max_scans = std::max(max_scans, a.counters.tuples_scanned);
      sum += a.counters.tuples_scanned;
    }
    const double pt = to_double(curve.at(store->s_units));
    csv << e << "," << static_cast<std::uint64_t>(budget) << "," << store->stored_tuples() << ","
        << store->counters.tuples_materialized << "," << max_scans << ","
        << (requests.empty() ? 0.0 : static_cast<double>(sum) / requests.size()) << "," << pt << ","
        << static_cast<std::uint64_t>(std::pow(n, pt)) << "\n";
  }
  write_out(o.out, csv.str());
  return 0;
}

int cmd_validate_proof(const Options& o) {
  std::ifstream f(o.proof);
  if (!f) throw InvalidArgument("cannot read " + o.proof);
  auto j = nlohmann::json::parse(f);
  std::vector<std::string> names;
  if (j.contains("variables")) names = j["variables"].get<std::vector<std::string>>();
  auto ps = proof_from_json(j, names);
  auto check = validate(ps);
  if (check.ok) {
    std::cout << "ok " << ps.steps.size() << " steps\n";
    return 0;
  }
  std::cout << "invalid at step " << check.failed_step << ": " << check.reason << "\n";
  return kExitValidation;
}

int cmd_generate(const Options& o) {
  auto q = load_query(o.query);
  auto db = random_database(q, o.rows, o.seed);
  save_database(db, o.out);
  if (o.trials > 0) {
    auto reqs = random_requests(q, bind_atoms(db, q), static_cast<std::size_t>(o.trials), o.seed + 1);
    Relation all("Q", q.access);
    for (const auto& r : reqs) all = union_of(all, r);
    write_out((std::filesystem::path(o.out) / "requests.tsv").string(), format_relation(all, q, db.dict));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time tradeoffs for conjunctive queries with access patterns"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--max-bag", o.max_bag, "largest bag size of enumerated decompositions (0: all variables)");
    c->add_option("--seed", o.seed, "random seed");
  };
  auto engine_flags = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "parallel rules during preprocessing")->check(CLI::PositiveNumber);
    c->add_option("--mode", o.mode, "bucketing: auto, geometric, heavy-light");
  };

  auto* analyze = app.add_subcommand("analyze", "PMTDs, rules, inequalities, proof sequences and the envelope");
  analyze->add_option("query", o.query)->required();
  analyze->add_option("--catalog", o.catalog, "extra terms to certify per rule");
  analyze->add_option("--format", o.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  analyze->add_flag("--emit-pmtds", o.emit_pmtds, "only the PMTD set as JSON");
  analyze->add_flag("--emit-rules", o.emit_rules, "only the pruned rules as JSON");
  analyze->add_option("--out", o.out, "output file");
  common(analyze);

  auto* pre = app.add_subcommand("preprocess", "build the S-views and online index");
  pre->add_option("query", o.query)->required();
  pre->add_option("--data", o.data, "database directory")->required();
  pre->add_option("--budget", o.budget, "space budget: tuples, N or N^e");
  pre->add_option("--out", o.out, "store directory")->required();
  common(pre);
  engine_flags(pre);

  auto* ans = app.add_subcommand("answer", "answer requests from a store");
  ans->add_option("query", o.query)->required();
  ans->add_option("--data", o.data, "database directory")->required();
  ans->add_option("--store", o.store, "store directory")->required();
  ans->add_option("--requests", o.requests, "requests TSV")->required();
  ans->add_flag("--batch", o.batch, "treat the file as one request relation");
  ans->add_option("--out", o.out, "answer TSV");
  ans->add_option("--counters", o.counters, "counters JSON (default: stderr)");
  common(ans);

  auto* ora = app.add_subcommand("oracle", "answer requests by direct join");
  ora->add_option("query", o.query)->required();
  ora->add_option("--data", o.data, "database directory")->required();
  ora->add_option("--requests", o.requests, "requests TSV")->required();
  ora->add_flag("--batch", o.batch, "treat the file as one request relation");
  ora->add_option("--out", o.out, "answer TSV");
  common(ora);

  auto* bench = app.add_subcommand("bench", "space and online scans over a budget sweep");
  bench->add_option("query", o.query)->required();
  bench->add_option("--data", o.data, "database directory (default: generated)");
  bench->add_option("--rows", o.rows, "rows per generated table");
  bench->add_option("--budgets", o.budgets, "comma separated logS values in units of log N");
  bench->add_option("--trials", o.trials, "requests per budget");
  bench->add_option("--out", o.out, "CSV file");
  common(bench);
  engine_flags(bench);

  auto* vp = app.add_subcommand("validate-proof", "replay a proof sequence in exact arithmetic");
  vp->add_option("proof", o.proof)->required();

  auto* gen = app.add_subcommand("generate", "write a random database and requests for a query");
  gen->add_option("query", o.query)->required();
  gen->add_option("--rows", o.rows, "rows per table");
  gen->add_option("--trials", o.trials, "requests to write (0: none)");
  gen->add_option("--out", o.out, "database directory")->required();
  common(gen);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return cmd_analyze(o);
    if (*pre) return cmd_preprocess(o);
    if (*ans) return cmd_answer(o);
    if (*ora) return cmd_oracle(o);
    if (*bench) return cmd_bench(o);
    if (*vp) return cmd_validate_proof(o);
    if (*gen) return cmd_generate(o);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return kExitResource;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
