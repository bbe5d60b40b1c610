// Command-line front end: solve, validate, bench, and profile-gen
// subcommands over MATPOWER-format case files.  Reports are JSON documents
// tagged with a schema version (see schema/); iteration traces and bench
// tables are CSV.  Exit codes: 0 solved and validated, 1 not converged or
// violations found, 2 usage or input error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridnlp/ipm/pattern_nlp.hpp"
#include "gridnlp/ipm/solver.hpp"
#include "gridnlp/power/matpower.hpp"
#include "gridnlp/power/network.hpp"
#include "gridnlp/power/opf.hpp"
#include "gridnlp/power/validate.hpp"

namespace {

using nlohmann::json;
using namespace gridnlp;
using Clock = std::chrono::steady_clock;

// All knobs a subcommand can consume; each one reads the subset it needs.
struct RunSpec {
  std::string case_path;
  std::string solution_path;
  index_t periods = 1;
  double resolution_minutes = 60.0;
  std::uint64_t seed = 1;
  double tol = 1e-4;
  int max_iter = 500;
  std::string linear_solver = "sparse";  // or "dense" (small problems only)
  double amplitude = 0.2;
  double noise = 0.02;
  std::string out_path;  // empty = stdout
  std::string log_path;  // empty = no iteration CSV
  std::vector<std::string> bench_rows;
  std::string roster_path;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file for writing: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

// Reports go to --out when given (with a one-line summary on stdout),
// otherwise the document itself is the stdout payload.
void emit_report(const json& doc, const std::string& out_path,
                 const std::string& summary) {
  std::string text = doc.dump(2);
  text += '\n';
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text_file(out_path, text);
    if (!summary.empty()) std::printf("%s\n", summary.c_str());
  }
}

int emit_error(const std::string& stage, const std::string& message,
               const std::string& out_path, int code) {
  json doc = {{"schema", "error.v1"}, {"stage", stage}, {"message", message}};
  std::fprintf(stderr, "error (%s): %s\n", stage.c_str(), message.c_str());
  try {
    emit_report(doc, out_path, "");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
  }
  return code;
}

json family_json(const power::FamilyCheck& f) {
  return {{"raw", f.raw}, {"scaled", f.scaled}};
}

json violations_json(const power::ViolationReport& rep) {
  return {{"tolerance", rep.tol},
          {"pass", rep.pass},
          {"worst_scaled", rep.worst_scaled()},
          {"balance_p", family_json(rep.balance_p)},
          {"balance_q", family_json(rep.balance_q)},
          {"flow_p", family_json(rep.flow_p)},
          {"flow_q", family_json(rep.flow_q)},
          {"thermal", family_json(rep.thermal)},
          {"bounds", family_json(rep.bounds)},
          {"angle", family_json(rep.angle)},
          {"ramp", family_json(rep.ramp)}};
}

json dispatch_json(const power::DispatchSolution& d) {
  return {{"pg", d.pg}, {"qg", d.qg}, {"p", d.p},
          {"q", d.q},   {"v", d.v},   {"theta", d.th}};
}

std::vector<double> doubles_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_array())
    throw Error(std::string("solution is missing array field: ") + key);
  return obj[key].get<std::vector<double>>();
}

power::DispatchSolution dispatch_from_json(const json& doc, index_t periods) {
  if (!doc.contains("dispatch") || !doc["dispatch"].is_object())
    throw Error("solution is missing the dispatch object");
  const json& d = doc["dispatch"];
  power::DispatchSolution out;
  out.periods = periods;
  out.pg = doubles_field(d, "pg");
  out.qg = doubles_field(d, "qg");
  out.p = doubles_field(d, "p");
  out.q = doubles_field(d, "q");
  out.v = doubles_field(d, "v");
  out.th = doubles_field(d, "theta");
  if (doc.contains("objective")) out.objective = doc["objective"].get<double>();
  return out;
}

std::string iteration_csv(const std::vector<ipm::IterationLog>& log) {
  std::string csv =
      "iter,objective,theta,stat,feas,comp,mu,alpha_primal,alpha_dual,"
      "delta_w,retries,trials\n";
  for (const ipm::IterationLog& r : log) {
    csv += std::to_string(r.iter);
    for (double v : {r.objective, r.theta, r.stat, r.feas, r.comp, r.mu,
                     r.alpha_primal, r.alpha_dual, r.delta_w})
      csv += "," + fmt(v);
    csv += "," + std::to_string(r.retries) + "," + std::to_string(r.trials);
    csv += '\n';
  }
  return csv;
}

struct SolveOutcome {
  ipm::SolveResult result;
  power::BuiltOpf built;
  double wall_seconds = 0.0;  // the solve call only
};

SolveOutcome run_solve(const power::MultiPeriodCase& mpc, const RunSpec& spec) {
  SolveOutcome out;
  out.built = power::build_multiperiod_opf(mpc);
  ipm::PatternNlp nlp(out.built.model);
  ipm::SolverConfig cfg;
  cfg.tol = spec.tol;
  cfg.max_iter = spec.max_iter;
  cfg.use_full_kkt = (spec.linear_solver == "dense");
  auto t0 = Clock::now();
  out.result = ipm::solve_nlp(nlp, cfg);
  out.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

int cmd_solve(const RunSpec& spec) {
  power::MultiPeriodCase mpc;
  try {
    power::NetworkData net = power::parse_matpower_file(spec.case_path);
    mpc = power::make_case(net, spec.periods, spec.resolution_minutes,
                           spec.seed, spec.amplitude, spec.noise);
  } catch (const std::exception& e) {
    return emit_error("input", e.what(), spec.out_path, 2);
  }

  SolveOutcome run;
  try {
    run = run_solve(mpc, spec);
  } catch (const std::exception& e) {
    return emit_error("solve", e.what(), spec.out_path, 1);
  }

  power::DispatchSolution dispatch = power::extract_dispatch(
      run.built.layout, run.result.x, run.result.objective);
  power::ViolationReport rep =
      power::validate_solution(mpc, dispatch, spec.tol);

  json doc = {{"schema", "solve-report.v1"},
              {"case", spec.case_path},
              {"periods", spec.periods},
              {"resolution_minutes", spec.resolution_minutes},
              {"seed", spec.seed},
              {"amplitude", spec.amplitude},
              {"noise", spec.noise},
              {"tolerance", spec.tol},
              {"max_iterations", spec.max_iter},
              {"linear_solver", spec.linear_solver},
              {"variables", run.built.model.n_vars()},
              {"constraints", run.built.model.n_cons()},
              {"status", ipm::to_string(run.result.status)},
              {"iterations", run.result.iterations},
              {"restorations", run.result.restorations},
              {"objective", run.result.objective},
              {"wall_time_seconds", run.wall_seconds},
              {"note", run.result.note},
              {"kkt",
               {{"stationarity", run.result.error.stat},
                {"feasibility", run.result.error.feas},
                {"complementarity", run.result.error.comp},
                {"overall", run.result.error.overall()}}},
              {"violations", violations_json(rep)},
              {"dispatch", dispatch_json(dispatch)}};

  bool ok = run.result.ok() && rep.pass;
  std::string summary = std::string(ipm::to_string(run.result.status)) +
                        " objective=" + fmt(run.result.objective) +
                        " iterations=" + std::to_string(run.result.iterations) +
                        " violations=" + (rep.pass ? "pass" : "FAIL") +
                        " wall=" + fmt(run.wall_seconds) + "s";
  try {
    emit_report(doc, spec.out_path, summary);
    if (!spec.log_path.empty())
      write_text_file(spec.log_path, iteration_csv(run.result.log));
  } catch (const std::exception& e) {
    return emit_error("io", e.what(), "", 2);
  }
  return ok ? 0 : 1;
}

int cmd_validate(const RunSpec& spec) {
  power::MultiPeriodCase mpc;
  power::DispatchSolution dispatch;
  double tol = spec.tol;
  try {
    json doc = json::parse(read_text_file(spec.solution_path));
    for (const char* key :
         {"periods", "resolution_minutes", "seed", "amplitude", "noise"})
      if (!doc.contains(key))
        throw Error(std::string("solution is missing field: ") + key);
    power::NetworkData net = power::parse_matpower_file(spec.case_path);
    mpc = power::make_case(net, doc["periods"].get<index_t>(),
                           doc["resolution_minutes"].get<double>(),
                           doc["seed"].get<std::uint64_t>(),
                           doc["amplitude"].get<double>(),
                           doc["noise"].get<double>());
    dispatch = dispatch_from_json(doc, mpc.periods());
    if (spec.tol < 0.0) tol = doc.value("tolerance", 1e-4);
  } catch (const std::exception& e) {
    return emit_error("input", e.what(), spec.out_path, 2);
  }

  power::ViolationReport rep;
  try {
    rep = power::validate_solution(mpc, dispatch, tol);
  } catch (const std::exception& e) {
    // Shape mismatches against the case dimensions land here.
    return emit_error("input", e.what(), spec.out_path, 2);
  }

  json doc = {{"schema", "violation-report.v1"},
              {"case", spec.case_path},
              {"periods", mpc.periods()},
              {"violations", violations_json(rep)}};
  std::string summary = std::string("violations=") +
                        (rep.pass ? "pass" : "FAIL") +
                        " worst_scaled=" + fmt(rep.worst_scaled());
  try {
    emit_report(doc, spec.out_path, summary);
  } catch (const std::exception& e) {
    return emit_error("io", e.what(), "", 2);
  }
  return rep.pass ? 0 : 1;
}

struct BenchRow {
  std::string case_path;
  index_t periods = 1;
  double resolution_minutes = 60.0;
};

BenchRow parse_bench_row(const std::string& text, double default_resolution) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
    throw Error("bench row must be PATH:PERIODS[:RESOLUTION]: " + text);
  BenchRow row;
  row.case_path = parts[0];
  row.resolution_minutes = default_resolution;
  try {
    std::size_t used = 0;
    row.periods = std::stol(parts[1], &used);
    if (used != parts[1].size()) throw Error("trailing characters");
    if (parts.size() == 3) {
      row.resolution_minutes = std::stod(parts[2], &used);
      if (used != parts[2].size()) throw Error("trailing characters");
    }
  } catch (const std::exception&) {
    throw Error("bench row has a malformed number: " + text);
  }
  if (row.periods < 1 || row.resolution_minutes <= 0.0)
    throw Error("bench row needs PERIODS >= 1 and RESOLUTION > 0: " + text);
  return row;
}

std::string sanitize_csv(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

int cmd_bench(const RunSpec& spec) {
  std::vector<BenchRow> roster;
  try {
    std::vector<std::string> texts = spec.bench_rows;
    if (!spec.roster_path.empty()) {
      std::istringstream lines(read_text_file(spec.roster_path));
      std::string line;
      while (std::getline(lines, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
          line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        if (line[0] == '#') continue;
        texts.push_back(line);
      }
    } else if (texts.empty()) {
      // Desk-scale default roster; larger instances go through --row.
      texts = {"data/case30.m:30:30", "data/case118.m:168:60"};
    }
    for (const std::string& t : texts)
      roster.push_back(parse_bench_row(t, spec.resolution_minutes));
  } catch (const std::exception& e) {
    return emit_error("usage", e.what(), "", 2);
  }

  std::string csv =
      "case,periods,variables,constraints,iterations,wall_time_seconds,"
      "status\n";
  for (const BenchRow& row : roster) {
    std::string status;
    index_t nvars = 0, ncons = 0;
    int iterations = 0;
    double wall = 0.0;
    try {
      power::NetworkData net = power::parse_matpower_file(row.case_path);
      power::MultiPeriodCase mpc =
          power::make_case(net, row.periods, row.resolution_minutes, spec.seed,
                           spec.amplitude, spec.noise);
      RunSpec row_spec = spec;
      row_spec.periods = row.periods;
      row_spec.resolution_minutes = row.resolution_minutes;
      SolveOutcome run = run_solve(mpc, row_spec);
      nvars = run.built.model.n_vars();
      ncons = run.built.model.n_cons();
      iterations = run.result.iterations;
      wall = run.wall_seconds;
      status = ipm::to_string(run.result.status);
    } catch (const std::exception& e) {
      // A failed row keeps its place in the table; the run continues.
      status = "error: " + sanitize_csv(e.what());
    }
    csv += sanitize_csv(row.case_path) + "," + std::to_string(row.periods) +
           "," + std::to_string(nvars) + "," + std::to_string(ncons) + "," +
           std::to_string(iterations) + "," + fmt(wall) + "," + status + "\n";
    std::fprintf(stderr, "bench %s T=%ld: %s\n", row.case_path.c_str(),
                 long(row.periods), status.c_str());
  }
  try {
    if (spec.out_path.empty())
      std::fputs(csv.c_str(), stdout);
    else
      write_text_file(spec.out_path, csv);
  } catch (const std::exception& e) {
    return emit_error("io", e.what(), "", 2);
  }
  return 0;
}

int cmd_profile_gen(const RunSpec& spec) {
  std::string csv;
  try {
    power::NetworkData net = power::parse_matpower_file(spec.case_path);
    power::LoadProfile prof = power::generate_load_profile(
        net, spec.periods, spec.resolution_minutes, spec.seed, spec.amplitude,
        spec.noise);
    csv = power::profile_to_csv(prof);
  } catch (const std::exception& e) {
    return emit_error("input", e.what(), "", 2);
  }
  try {
    if (spec.out_path.empty())
      std::fputs(csv.c_str(), stdout);
    else
      write_text_file(spec.out_path, csv);
  } catch (const std::exception& e) {
    return emit_error("io", e.what(), "", 2);
  }
  return 0;
}

void add_case_flag(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--case", spec.case_path, "MATPOWER-format case file")
      ->required();
}

void add_profile_flags(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--periods", spec.periods, "number of periods (>= 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--resolution", spec.resolution_minutes,
                  "minutes per period")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", spec.seed, "load profile RNG seed");
  cmd->add_option("--amplitude", spec.amplitude,
                  "sinusoid amplitude, in [0, 1)");
  cmd->add_option("--noise", spec.noise, "uniform noise half-width, >= 0");
}

void add_solver_flags(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--tol", spec.tol, "convergence tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", spec.max_iter, "iteration budget")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--linear-solver", spec.linear_solver,
                  "KKT path: sparse (condensed) or dense (small oracle)")
      ->check(CLI::IsMember({"sparse", "dense"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-period dispatch optimizer over MATPOWER case files"};
  app.require_subcommand(1);
  RunSpec spec;

  CLI::App* solve = app.add_subcommand(
      "solve", "solve a case and write a JSON report (+ optional CSV trace)");
  add_case_flag(solve, spec);
  add_profile_flags(solve, spec);
  add_solver_flags(solve, spec);
  solve->add_option("--out", spec.out_path, "report path (default: stdout)");
  solve->add_option("--log", spec.log_path, "iteration CSV path");

  CLI::App* validate = app.add_subcommand(
      "validate", "recheck a solve report against its case");
  add_case_flag(validate, spec);
  validate
      ->add_option("--solution", spec.solution_path,
                   "solve report (or any JSON with profile fields + dispatch)")
      ->required();
  validate
      ->add_option(
          "--tol", spec.tol,
          "violation tolerance (default: the solution's own tolerance)")
      ->check(CLI::NonNegativeNumber);
  validate->add_option("--out", spec.out_path,
                       "report path (default: stdout)");

  CLI::App* bench = app.add_subcommand(
      "bench", "solve a roster of (case, periods) rows and tabulate CSV");
  bench->add_option("--row", spec.bench_rows,
                    "roster row PATH:PERIODS[:RESOLUTION], repeatable");
  bench->add_option("--roster-file", spec.roster_path,
                    "file with one roster row per line (# comments)");
  bench->add_option("--resolution", spec.resolution_minutes,
                    "default minutes per period for rows without one")
      ->check(CLI::PositiveNumber);
  bench->add_option("--seed", spec.seed, "load profile RNG seed");
  bench->add_option("--amplitude", spec.amplitude, "sinusoid amplitude");
  bench->add_option("--noise", spec.noise, "uniform noise half-width");
  add_solver_flags(bench, spec);
  bench->add_option("--out", spec.out_path, "CSV path (default: stdout)");

  CLI::App* profile = app.add_subcommand(
      "profile-gen", "generate a load-scale profile CSV for a case");
  add_case_flag(profile, spec);
  add_profile_flags(profile, spec);
  profile->add_option("--out", spec.out_path, "CSV path (default: stdout)");

  // The validate subcommand treats a negative tolerance sentinel as "use the
  // tolerance recorded in the solution file"; 0 is meaningful strictness.
  bool tol_given = false;
  validate->callback([&] { tol_given = validate->count("--tol") > 0; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve) return cmd_solve(spec);
    if (*validate) {
      RunSpec vspec = spec;
      if (!tol_given) vspec.tol = -1.0;
      return cmd_validate(vspec);
    }
    if (*bench) return cmd_bench(spec);
    if (*profile) return cmd_profile_gen(spec);
  } catch (const std::exception& e) {
    return emit_error("input", e.what(), "", 2);
  }
  return 2;
}
