// Process-level tests of the command-line tool: exit codes, report shapes
// against the shipped JSON schemas, CSV outputs, and run-to-run determinism.

#include <sys/wait.h>
#include <unistd.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

using nlohmann::json;

namespace {

const std::string kCli = GRIDNLP_CLI_BIN;
const std::string kData = GRIDNLP_DATA_DIR;
const std::string kSchemas = GRIDNLP_SCHEMA_DIR;

std::string work_dir() {
  static std::string dir = [] {
    std::string d = (std::filesystem::temp_directory_path() /
                     ("gridnlp_cli_" + std::to_string(getpid())))
                        .string();
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the tool with stdout/stderr routed away; returns the exit code.
int run_cli(const std::string& args) {
  std::string cmd = kCli + " " + args + " >/dev/null 2>/dev/null";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  REQUIRE(f.good());
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Minimal structural validator for the subset of JSON Schema the shipped
// schemas use: type, enum, required, properties, items, and local $refs
// into #/definitions.
void check_schema(const json& inst, const json& schema, const json& root,
                  const std::string& where) {
  INFO("at " << where);
  if (schema.contains("$ref")) {
    std::string ref = schema["$ref"].get<std::string>();
    REQUIRE(ref.rfind("#/", 0) == 0);
    json resolved = root;
    std::string path = ref.substr(2);
    std::istringstream ss(path);
    std::string key;
    while (std::getline(ss, key, '/')) {
      REQUIRE(resolved.contains(key));
      resolved = resolved[key];
    }
    check_schema(inst, resolved, root, where);
    return;
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const json& v : schema["enum"]) found = found || (v == inst);
    REQUIRE(found);
  }
  if (schema.contains("type")) {
    std::string t = schema["type"].get<std::string>();
    if (t == "object") REQUIRE(inst.is_object());
    if (t == "array") REQUIRE(inst.is_array());
    if (t == "string") REQUIRE(inst.is_string());
    if (t == "number") REQUIRE(inst.is_number());
    if (t == "integer") REQUIRE(inst.is_number_integer());
    if (t == "boolean") REQUIRE(inst.is_boolean());
  }
  if (schema.contains("required"))
    for (const json& key : schema["required"]) {
      INFO("required field " << key.get<std::string>());
      REQUIRE(inst.contains(key.get<std::string>()));
    }
  if (schema.contains("properties") && inst.is_object())
    for (auto& [key, sub] : schema["properties"].items())
      if (inst.contains(key))
        check_schema(inst[key], sub, root, where + "." + key);
  if (schema.contains("items") && inst.is_array())
    for (std::size_t i = 0; i < inst.size(); ++i)
      check_schema(inst[i], schema["items"], root,
                   where + "[" + std::to_string(i) + "]");
}

void require_matches_schema(const json& inst, const std::string& schema_name) {
  json schema = load_json(kSchemas + "/" + schema_name + ".json");
  REQUIRE(inst.value("schema", "") == schema_name);
  check_schema(inst, schema, schema, schema_name);
}

}  // namespace

TEST_CASE("solve writes a schema-conforming report and exits zero") {
  std::string out = work_dir() + "/solve9.json";
  std::string log = work_dir() + "/solve9.csv";
  int rc = run_cli("solve --case " + kData + "/case9.m --periods 1" +
                   " --tol 1e-8 --out " + out + " --log " + log);
  CHECK(rc == 0);

  json rep = load_json(out);
  require_matches_schema(rep, "solve-report.v1");
  CHECK(rep["status"] == "solved");
  CHECK(rep["violations"]["pass"] == true);
  CHECK(rep["variables"] == 42);
  CHECK(rep["objective"].get<double>() > 0.0);
  CHECK(rep["dispatch"]["pg"].size() == 3);
  CHECK(rep["dispatch"]["v"].size() == 9);

  auto csv = lines_of(slurp(log));
  REQUIRE(csv.size() >= 2);
  CHECK(csv[0] ==
        "iter,objective,theta,stat,feas,comp,mu,alpha_primal,alpha_dual,"
        "delta_w,retries,trials");
  CHECK(split_csv(csv[1]).size() == 12);
}

TEST_CASE("solve reports the documented case30 dimensions") {
  std::string out = work_dir() + "/solve30.json";
  int rc = run_cli("solve --case " + kData + "/case30.m --periods 30" +
                   " --resolution 30 --tol 1e-4 --out " + out);
  CHECK(rc == 0);
  json rep = load_json(out);
  CHECK(rep["variables"] == 4620);
  CHECK(rep["status"] == "solved");
}

TEST_CASE("input and usage failures use the documented exit codes") {
  SECTION("nonexistent case file: structured error, exit 2") {
    std::string out = work_dir() + "/err.json";
    int rc = run_cli("solve --case " + work_dir() + "/nope.m --out " + out);
    CHECK(rc == 2);
    json err = load_json(out);
    require_matches_schema(err, "error.v1");
    CHECK(err["stage"] == "input");
  }
  SECTION("unknown subcommand") {
    CHECK(run_cli("frobnicate") == 2);
  }
  SECTION("missing required flag") {
    CHECK(run_cli("solve") == 2);
  }
  SECTION("solve rejects a zero tolerance") {
    CHECK(run_cli("solve --case " + kData + "/case9.m --tol 0") == 2);
  }
  SECTION("help exits zero") {
    CHECK(run_cli("--help") == 0);
  }
}

TEST_CASE("validate round-trips a solve report") {
  std::string out = work_dir() + "/rt.json";
  REQUIRE(run_cli("solve --case " + kData + "/case9.m --periods 2" +
                  " --tol 1e-4 --out " + out) == 0);

  SECTION("solved output passes at its own tolerance") {
    std::string vout = work_dir() + "/rt_v.json";
    int rc = run_cli("validate --case " + kData + "/case9.m --solution " +
                     out + " --out " + vout);
    CHECK(rc == 0);
    json rep = load_json(vout);
    require_matches_schema(rep, "violation-report.v1");
    CHECK(rep["violations"]["pass"] == true);
    CHECK(rep["violations"]["tolerance"].get<double>() == 1e-4);
  }
  SECTION("zero tolerance fails the same solution") {
    CHECK(run_cli("validate --case " + kData + "/case9.m --solution " + out +
                  " --tol 0") == 1);
  }
  SECTION("solution against the wrong case is a shape error") {
    CHECK(run_cli("validate --case " + kData + "/case30.m --solution " +
                  out) == 2);
  }
}

TEST_CASE("zeroed dispatch reports the loads as balance violations") {
  json sol = {{"periods", 1},
              {"resolution_minutes", 60.0},
              {"seed", 1},
              {"amplitude", 0.0},
              {"noise", 0.0},
              {"dispatch",
               {{"pg", std::vector<double>(3, 0.0)},
                {"qg", std::vector<double>(3, 0.0)},
                {"p", std::vector<double>(9, 0.0)},
                {"q", std::vector<double>(9, 0.0)},
                {"v", std::vector<double>(9, 0.0)},
                {"theta", std::vector<double>(9, 0.0)}}}};
  std::string path = work_dir() + "/zero.json";
  spit(path, sol.dump());
  std::string vout = work_dir() + "/zero_v.json";
  int rc = run_cli("validate --case " + kData + "/case9.m --solution " +
                   path + " --tol 1e-4 --out " + vout);
  CHECK(rc == 1);
  json rep = load_json(vout);
  // Largest bus mismatch is the largest per-unit load (125 MW / 100 MVA).
  CHECK(rep["violations"]["balance_p"]["raw"].get<double>() == 1.25);
  CHECK(rep["violations"]["pass"] == false);
}

TEST_CASE("bench tabulates rows, records failures, and continues") {
  std::string out = work_dir() + "/bench.csv";
  int rc = run_cli("bench --row " + kData + "/case9.m:2 --row " + kData +
                   "/case9.m:2 --row " + work_dir() +
                   "/missing.m:4 --out " + out);
  CHECK(rc == 0);
  auto rows = lines_of(slurp(out));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] ==
        "case,periods,variables,constraints,iterations,wall_time_seconds,"
        "status");
  auto a = split_csv(rows[1]);
  auto b = split_csv(rows[2]);
  auto c = split_csv(rows[3]);
  REQUIRE(a.size() == 7);
  // Identical specs agree on everything except wall time.
  CHECK(a[2] == b[2]);  // variables
  CHECK(a[3] == b[3]);  // constraints
  CHECK(a[4] == b[4]);  // iterations
  CHECK(a[6] == "solved");
  CHECK(a[2] == "84");
  CHECK(c[6].rfind("error: ", 0) == 0);

  SECTION("empty roster file yields a header-only table") {
    std::string roster = work_dir() + "/empty.txt";
    spit(roster, "");
    std::string out2 = work_dir() + "/bench_empty.csv";
    CHECK(run_cli("bench --roster-file " + roster + " --out " + out2) == 0);
    CHECK(lines_of(slurp(out2)).size() == 1);
  }
  SECTION("malformed roster row is a usage error") {
    CHECK(run_cli("bench --row " + kData + "/case9.m") == 2);
    CHECK(run_cli("bench --row " + kData + "/case9.m:zero") == 2);
  }
}

TEST_CASE("profile generation is reproducible and shaped as documented") {
  std::string p1 = work_dir() + "/prof1.csv";
  std::string p2 = work_dir() + "/prof2.csv";
  std::string args = "profile-gen --case " + kData +
                     "/case9.m --periods 48 --resolution 30 --seed 7 --out ";
  REQUIRE(run_cli(args + p1) == 0);
  REQUIRE(run_cli(args + p2) == 0);
  CHECK(slurp(p1) == slurp(p2));

  auto rows = lines_of(slurp(p1));
  REQUIRE(rows.size() == 49);  // header + one row per period
  CHECK(rows[0] == "period,load0,load1,load2");

  SECTION("no amplitude and no noise gives the flat profile") {
    std::string p3 = work_dir() + "/prof_flat.csv";
    REQUIRE(run_cli("profile-gen --case " + kData +
                    "/case9.m --periods 3 --amplitude 0 --noise 0 --out " +
                    p3) == 0);
    auto flat = lines_of(slurp(p3));
    REQUIRE(flat.size() == 4);
    for (std::size_t i = 1; i < flat.size(); ++i) {
      auto cells = split_csv(flat[i]);
      REQUIRE(cells.size() == 4);
      for (std::size_t j = 1; j < cells.size(); ++j)
        CHECK(std::stod(cells[j]) == 1.0);
    }
  }
}

TEST_CASE("identical solve runs are bit-for-bit deterministic") {
  std::string args = "solve --case " + kData +
                     "/case9.m --periods 3 --tol 1e-6 --seed 5";
  std::string o1 = work_dir() + "/det1.json", l1 = work_dir() + "/det1.csv";
  std::string o2 = work_dir() + "/det2.json", l2 = work_dir() + "/det2.csv";
  REQUIRE(run_cli(args + " --out " + o1 + " --log " + l1) == 0);
  REQUIRE(run_cli(args + " --out " + o2 + " --log " + l2) == 0);
  CHECK(slurp(l1) == slurp(l2));
  json a = load_json(o1), b = load_json(o2);
  CHECK(a["objective"].get<double>() == b["objective"].get<double>());
  CHECK(a["dispatch"] == b["dispatch"]);
  CHECK(a["iterations"] == b["iterations"]);
}
