// Acceptance suite: one line of output per criterion, [PASS] or [FAIL],
// nonzero exit if anything failed.  Each check is built on an oracle that is
// independent of the code path it certifies: the unreduced dense KKT system
// for the condensed step, central finite differences for the taped
// derivatives, the straight-loop constraint validator for solve quality, and
// byte comparison of process outputs for determinism.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridnlp/ipm/full_kkt.hpp"
#include "gridnlp/ipm/lifted.hpp"
#include "gridnlp/ipm/pattern_nlp.hpp"
#include "gridnlp/ipm/solver.hpp"
#include "gridnlp/power/matpower.hpp"
#include "gridnlp/power/opf.hpp"
#include "gridnlp/power/validate.hpp"
#include "support/fd_oracle.hpp"

using namespace gridnlp;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = GRIDNLP_DATA_DIR;
const std::string kCli = GRIDNLP_CLI_BIN;

struct Line {
  int id = 0;
  bool pass = false;
  std::string text;
};
std::vector<Line> g_lines;

void report(int id, const std::string& title, bool pass,
            const std::string& note) {
  Line line;
  line.id = id;
  line.pass = pass;
  line.text = std::string("[") + (pass ? "PASS" : "FAIL") + "] " +
              std::to_string(id) + " " + title +
              (note.empty() ? "" : " — " + note);
  g_lines.push_back(line);
  std::fprintf(stderr, "%s\n", line.text.c_str());  // progress while running
}

struct Timer {
  Clock::time_point t0 = Clock::now();
  double seconds() const {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

power::MultiPeriodCase load_case(const std::string& name, index_t T,
                                 double res, double amplitude, double noise,
                                 double ramp_fraction = 0.1) {
  power::MatpowerOptions opt;
  opt.ramp_fraction = ramp_fraction;
  power::NetworkData net = power::parse_matpower_file(kData + "/" + name, opt);
  return power::make_case(net, T, res, 1, amplitude, noise);
}

// Audit shared by every full solve in this binary: each accepted step must
// have factorized with all pivots positive (dimension positives, no
// negatives, no zeros).
struct InertiaAudit {
  long accepted = 0;
  long clean = 0;
  void attach(ipm::SolverConfig& cfg) {
    cfg.observer = [this](const ipm::StepRecord& rec) {
      if (!rec.accepted) return;
      ++accepted;
      if (rec.inertia == sparse::Inertia{rec.system_dim, 0, 0}) ++clean;
    };
  }
};

InertiaAudit g_audit;

ipm::SolveResult solve_case(const power::MultiPeriodCase& mpc, double tol,
                            power::BuiltOpf& built) {
  built = power::build_multiperiod_opf(mpc);
  ipm::PatternNlp nlp(built.model);
  ipm::SolverConfig cfg;
  cfg.tol = tol;
  g_audit.attach(cfg);
  return ipm::solve_nlp(nlp, cfg);
}

// max |a-b| / max(1, max |a|): sup-norm difference relative to the sup norm.
double rel_sup(std::span<const double> a, std::span<const double> b) {
  double scale = 1.0, diff = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(a[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

// ---------------------------------------------------------------- criterion 1
// The production step path (condense, factorize, recover) must reproduce the
// direction of the unreduced dense system on the early iterates of a real
// case, across all seven direction components.
void criterion_condensation() {
  Timer timer;
  power::MultiPeriodCase mpc = load_case("case9.m", 1, 60.0, 0.2, 0.02);
  power::BuiltOpf built = power::build_multiperiod_opf(mpc);
  ipm::PatternNlp nlp(built.model);
  ipm::LiftedProblem lifted(nlp, 1e-4);

  std::vector<ipm::StepRecord> records;
  ipm::SolverConfig cfg;
  cfg.tol = 1e-6;
  cfg.observer = [&](const ipm::StepRecord& r) {
    if (r.iter < 5) records.push_back(r);
  };
  ipm::IpmSolver solver(lifted, cfg);
  ipm::SolveResult res = solver.solve();

  ipm::FullKkt full(lifted.n(), lifted.m(), lifted.jac_rows(),
                    lifted.jac_cols(), lifted.hess_rows(), lifted.hess_cols(),
                    lifted.x_lower(), lifted.x_upper(), lifted.s_lower(),
                    lifted.s_upper());
  std::vector<double> jvals(static_cast<size_t>(lifted.jac_nnz()));
  std::vector<double> hvals(static_cast<size_t>(lifted.hess_nnz()));
  std::vector<double> hweights(static_cast<size_t>(lifted.m()));

  double worst = 0.0;
  std::string note;
  bool ok = res.ok() && records.size() == 5;
  if (!ok) note = "expected a solved run with 5 captured iterates";
  for (const ipm::StepRecord& rec : records) {
    if (!ok) break;
    for (size_t i = 0; i < hweights.size(); ++i)
      hweights[i] = -rec.iterate.y[i];
    if (!lifted.eval_jac(rec.iterate.x, jvals) ||
        !lifted.eval_hess(rec.iterate.x, hweights, 1.0, hvals)) {
      ok = false;
      note = "derivative evaluation failed at a captured iterate";
      break;
    }
    full.assemble(hvals, jvals, rec.iterate, rec.residuals, rec.delta_w,
                  rec.delta_c);
    if (!full.factorize()) {
      ok = false;
      note = "dense reference factorization failed";
      break;
    }
    ipm::Direction ref;
    full.solve(ref);
    worst = std::max(worst, rel_sup(ref.dx, rec.direction.dx));
    worst = std::max(worst, rel_sup(ref.ds, rec.direction.ds));
    worst = std::max(worst, rel_sup(ref.dy, rec.direction.dy));
    worst = std::max(worst, rel_sup(ref.dzlx, rec.direction.dzlx));
    worst = std::max(worst, rel_sup(ref.dzux, rec.direction.dzux));
    worst = std::max(worst, rel_sup(ref.dzls, rec.direction.dzls));
    worst = std::max(worst, rel_sup(ref.dzus, rec.direction.dzus));
  }
  double secs = timer.seconds();
  ok = ok && worst <= 1e-6 && secs < 10.0;
  if (note.empty())
    note = "max relative sup-norm difference " + fmt("%.2e", worst) +
           " over 5 iterates x 7 components, " + fmt("%.1f", secs) + "s";
  report(1, "condensed step equals the unreduced-system step", ok, note);
}

// ---------------------------------------------------------------- criterion 2
// Solved instances must stay within the requested tolerance under the
// independent validator at 1e-4 (required) and 1e-6 (waivable with a note).
void criterion_tolerance() {
  struct Instance {
    const char* name;
    index_t T;
    double res;
  };
  const Instance instances[] = {{"case9.m", 1, 60.0},
                                {"case9.m", 10, 60.0},
                                {"case30.m", 1, 60.0},
                                {"case30.m", 30, 30.0}};
  bool ok = true;
  std::string note;
  std::string waivers;
  for (double tol : {1e-4, 1e-6}) {
    for (const Instance& inst : instances) {
      power::MultiPeriodCase mpc =
          load_case(inst.name, inst.T, inst.res, 0.2, 0.02);
      power::BuiltOpf built;
      ipm::SolveResult res = solve_case(mpc, tol, built);
      power::DispatchSolution d =
          power::extract_dispatch(built.layout, res.x, res.objective);
      power::ViolationReport rep = power::validate_solution(mpc, d, tol);
      if (res.ok() && rep.pass) continue;
      std::string what = std::string(inst.name) + " T=" +
                         std::to_string(inst.T) + " at " + fmt("%.0e", tol) +
                         ": " + ipm::to_string(res.status) +
                         ", worst scaled violation " +
                         fmt("%.2e", rep.worst_scaled());
      if (tol == 1e-6) {
        waivers +=
            (waivers.empty() ? "waived best-effort level: " : "; ") + what;
      } else {
        ok = false;
        note = what;
      }
    }
  }
  if (note.empty()) {
    note = "4 instances solved and validated at 1e-4 and 1e-6";
    if (!waivers.empty()) note = waivers;
  }
  report(2, "solves stay within the requested violation tolerance", ok, note);
}

// ---------------------------------------------------------------- criterion 3
// Taped gradient, Jacobian, and weighted Hessian must match central finite
// differences at random interior points of the dispatch models.
void criterion_derivatives() {
  Timer timer;
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  bool ok = true;

  for (const char* name : {"case9.m", "case30.m"}) {
    power::MultiPeriodCase mpc = load_case(name, 1, 60.0, 0.2, 0.02);
    power::BuiltOpf built = power::build_multiperiod_opf(mpc);
    ipm::PatternNlp nlp(built.model);
    const size_t n = static_cast<size_t>(nlp.n_vars());
    const size_t m = static_cast<size_t>(nlp.n_cons());
    auto xl = nlp.x_lower();
    auto xu = nlp.x_upper();
    auto xs = nlp.x_start();

    auto fobj = [&](std::span<const double> x) {
      double v = 0.0;
      if (!nlp.eval_f(x, v)) throw Error("objective evaluation failed");
      return v;
    };
    auto fcons = [&](std::span<const double> x) {
      std::vector<double> g(m);
      if (!nlp.eval_g(x, g)) throw Error("constraint evaluation failed");
      return g;
    };

    std::vector<double> weights(m);
    for (double& w : weights) w = 2.0 * unit(rng) - 1.0;
    auto flagr = [&](std::span<const double> x) {
      double v = fobj(x);
      std::vector<double> g = fcons(x);
      for (size_t i = 0; i < m; ++i) v += weights[i] * g[i];
      return v;
    };

    for (int point = 0; point < 10; ++point) {
      std::vector<double> x(n);
      for (size_t i = 0; i < n; ++i) {
        const double lo = xl[i], hi = xu[i];
        if (lo == hi) {
          x[i] = lo;
        } else if (lo > -kInf && hi < kInf) {
          x[i] = lo + (0.15 + 0.7 * unit(rng)) * (hi - lo);
        } else {
          x[i] = xs[i] + 0.2 * (unit(rng) - 0.5);
        }
      }

      // Gradient.
      std::vector<double> grad(n);
      if (!nlp.eval_grad(x, grad)) throw Error("gradient evaluation failed");
      worst = std::max(worst, rel_sup(grad, fd_gradient(fobj, x)));

      // Jacobian, scattered dense with duplicates accumulated.
      std::vector<double> jvals(nlp.jac_rows().size());
      if (!nlp.eval_jac(x, jvals)) throw Error("jacobian evaluation failed");
      std::vector<double> jdense(m * n, 0.0);
      for (size_t k = 0; k < jvals.size(); ++k)
        jdense[static_cast<size_t>(nlp.jac_rows()[k]) * n +
               static_cast<size_t>(nlp.jac_cols()[k])] += jvals[k];
      worst = std::max(worst, rel_sup(jdense, fd_jacobian(fcons, x, m)));

      // Weighted Hessian of objective + weights . constraints, lower
      // triangle scattered symmetric.
      std::vector<double> hvals(nlp.hess_rows().size());
      if (!nlp.eval_hess(x, weights, 1.0, hvals))
        throw Error("hessian evaluation failed");
      std::vector<double> hdense(n * n, 0.0);
      for (size_t k = 0; k < hvals.size(); ++k) {
        const size_t r = static_cast<size_t>(nlp.hess_rows()[k]);
        const size_t c = static_cast<size_t>(nlp.hess_cols()[k]);
        hdense[r * n + c] += hvals[k];
        if (r != c) hdense[c * n + r] += hvals[k];
      }
      worst = std::max(worst, rel_sup(hdense, fd_hessian(flagr, x)));
    }
  }
  double secs = timer.seconds();
  ok = ok && worst <= 1e-6 && secs < 30.0;
  std::string note = "max relative sup-norm difference " + fmt("%.2e", worst) +
                     " over 2 cases x 10 points, " + fmt("%.1f", secs) + "s";
  report(3, "taped derivatives match central finite differences", ok, note);
}

// ---------------------------------------------------------------- criterion 5
// (a) With ramping disabled and a flat profile the horizon separates: the
// 10-period objective is 10x the single-period one.  (b) With zero ramping
// capacity every generator's dispatch is pinned across the horizon.
void criterion_temporal() {
  bool ok = true;
  std::string note;

  power::MultiPeriodCase flat1 = load_case("case9.m", 1, 60.0, 0.0, 0.0, kInf);
  power::MultiPeriodCase flat10 =
      load_case("case9.m", 10, 60.0, 0.0, 0.0, kInf);
  power::BuiltOpf b1, b10;
  ipm::SolveResult r1 = solve_case(flat1, 1e-8, b1);
  ipm::SolveResult r10 = solve_case(flat10, 1e-8, b10);
  double rel = std::abs(r10.objective - 10.0 * r1.objective) /
               std::abs(10.0 * r1.objective);
  if (!r1.ok() || !r10.ok() || rel > 1e-6) {
    ok = false;
    note = "flat uncoupled horizon: objective ratio off by " +
           fmt("%.2e", rel) + " relative";
  }

  // Zero ramping capacity pins total generation, so the load swing must fit
  // inside the equality-relaxation slack for the instance to be feasible at
  // all; this amplitude keeps the ramp rows binding (the per-step dispatch
  // moves press against the relaxed cap) without starving the balance rows.
  power::MultiPeriodCase pinned =
      load_case("case9.m", 10, 60.0, 3e-4, 1e-5, 0.0);
  power::BuiltOpf bp;
  const double tol = 1e-4;
  ipm::SolveResult rp = solve_case(pinned, tol, bp);
  power::DispatchSolution d =
      power::extract_dispatch(bp.layout, rp.x, rp.objective);
  double spread = 0.0;
  const index_t T = bp.layout.periods;
  for (index_t g = 0; g < bp.layout.n_gen; ++g) {
    double lo = kInf, hi = -kInf;
    for (index_t t = 0; t < T; ++t) {
      const double v = d.pg[static_cast<size_t>(g * T + t)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    spread = std::max(spread, hi - lo);
  }
  if (!rp.ok() || spread > 10.0 * tol) {
    ok = false;
    if (!note.empty()) note += "; ";
    note += "zero-ramp horizon: dispatch spread " + fmt("%.2e", spread);
  }
  if (ok)
    note = "separability off by " + fmt("%.2e", rel) +
           " relative; zero-ramp dispatch spread " + fmt("%.2e", spread);
  report(5, "ramp coupling shapes the horizon as documented", ok, note);
}

// ---------------------------------------------------------------- criterion 6
// Model sizes of the two benchmark instances must sit within a factor of two
// of the reference sizes documented in the README, and build fast.
void criterion_scale() {
  struct Ref {
    const char* name;
    index_t T;
    double res;
    double ref_vars, ref_cons;
  };
  const Ref refs[] = {{"case30.m", 30, 30.0, 7e3, 11e3},
                      {"case118.m", 168, 60.0, 183e3, 268e3}};
  bool ok = true;
  std::string note;
  for (const Ref& ref : refs) {
    Timer timer;
    power::MultiPeriodCase mpc = load_case(ref.name, ref.T, ref.res, 0.2, 0.02);
    power::BuiltOpf built = power::build_multiperiod_opf(mpc);
    double secs = timer.seconds();
    const double nv = built.model.n_vars();
    const double nc = built.model.n_cons();
    bool in_window = nv >= ref.ref_vars / 2 && nv <= ref.ref_vars * 2 &&
                     nc >= ref.ref_cons / 2 && nc <= ref.ref_cons * 2;
    if (!in_window || secs >= 5.0) ok = false;
    if (!note.empty()) note += "; ";
    note += std::string(ref.name) + " T=" + std::to_string(ref.T) + ": " +
            std::to_string(built.model.n_vars()) + " vars / " +
            std::to_string(built.model.n_cons()) + " rows in " +
            fmt("%.2f", secs) + "s";
  }
  report(6, "built model sizes sit in the documented scale windows", ok, note);
}

// ---------------------------------------------------------------- criterion 7
// The large instance must solve on one core to 1e-4 within the iteration and
// wall-clock budget, and validate.
void criterion_large_case() {
  power::MultiPeriodCase mpc = load_case("case118.m", 168, 60.0, 0.2, 0.02);
  power::BuiltOpf built;
  Timer timer;
  ipm::SolveResult res = solve_case(mpc, 1e-4, built);
  double secs = timer.seconds();
  power::DispatchSolution d =
      power::extract_dispatch(built.layout, res.x, res.objective);
  power::ViolationReport rep = power::validate_solution(mpc, d, 1e-4);
  bool ok =
      res.ok() && rep.pass && res.iterations <= 500 && secs < 30.0 * 60.0;
  std::string note = std::string(ipm::to_string(res.status)) + " in " +
                     std::to_string(res.iterations) + " iterations, " +
                     fmt("%.0f", secs) + "s, worst scaled violation " +
                     fmt("%.2e", rep.worst_scaled());
  report(7, "the 118-bus week-long horizon solves within budget", ok, note);
}

// ---------------------------------------------------------------- criterion 4
// Reported after every solve above has run: each accepted step's
// factorization must have shown strictly positive-definite inertia.
void criterion_inertia() {
  bool ok = g_audit.accepted > 0 && g_audit.clean == g_audit.accepted;
  std::string note = std::to_string(g_audit.clean) + "/" +
                     std::to_string(g_audit.accepted) +
                     " accepted steps factorized positive definite";
  report(4, "every accepted step has clean inertia", ok, note);
}

// ---------------------------------------------------------------- criterion 8
// Two identical solve processes must produce byte-identical iteration traces
// and bit-identical final objectives.
void criterion_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("gridnlp_accept_" + std::to_string(getpid()));
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  auto run_once = [&](const std::string& tag) {
    const std::string out = (dir / ("rep_" + tag + ".json")).string();
    const std::string log = (dir / ("log_" + tag + ".csv")).string();
    std::string cmd = kCli + " solve --case " + kData +
                      "/case9.m --periods 3 --tol 1e-6 --seed 5 --out " + out +
                      " --log " + log + " >/dev/null 2>/dev/null";
    int rc = std::system(cmd.c_str());
    return (rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0)
               ? std::pair<std::string, std::string>(slurp(out), slurp(log))
               : std::pair<std::string, std::string>("", "");
  };
  auto [rep1, log1] = run_once("a");
  auto [rep2, log2] = run_once("b");

  // The reports differ only in measured wall time; compare the objective
  // field textually so agreement is bit-for-bit.
  auto field = [](const std::string& text, const std::string& key) {
    const size_t at = text.find("\"" + key + "\"");
    if (at == std::string::npos) return std::string();
    const size_t end = text.find_first_of(",}\n", at);
    return text.substr(at, end - at);
  };
  bool ran = !rep1.empty() && !rep2.empty() && !log1.empty();
  bool ok = ran && log1 == log2 &&
            field(rep1, "objective") == field(rep2, "objective") &&
            !field(rep1, "objective").empty();
  std::string note =
      ok ? "iteration traces byte-identical, objectives bit-identical"
         : (ran ? "repeat runs diverged"
                : "solve process did not exit cleanly");
  report(8, "repeated solve runs are bit-for-bit identical", ok, note);
  fs::remove_all(dir);
}

void guarded(int id, const char* title, void (*fn)()) {
  const size_t before = g_lines.size();
  try {
    fn();
  } catch (const std::exception& e) {
    if (g_lines.size() == before)
      report(id, title, false, std::string("unhandled exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded(1, "condensed step equals the unreduced-system step",
          criterion_condensation);
  guarded(2, "solves stay within the requested violation tolerance",
          criterion_tolerance);
  guarded(3, "taped derivatives match central finite differences",
          criterion_derivatives);
  guarded(5, "ramp coupling shapes the horizon as documented",
          criterion_temporal);
  guarded(6, "built model sizes sit in the documented scale windows",
          criterion_scale);
  guarded(7, "the 118-bus week-long horizon solves within budget",
          criterion_large_case);
  guarded(4, "every accepted step has clean inertia", criterion_inertia);
  guarded(8, "repeated solve runs are bit-for-bit identical",
          criterion_determinism);

  std::sort(g_lines.begin(), g_lines.end(),
            [](const Line& a, const Line& b) { return a.id < b.id; });
  int failures = 0;
  for (const Line& line : g_lines) {
    std::printf("%s\n", line.text.c_str());
    if (!line.pass) ++failures;
  }
  std::printf("%d of %d criteria passed\n", int(g_lines.size()) - failures,
              int(g_lines.size()));
  return failures == 0 ? 0 : 1;
}
