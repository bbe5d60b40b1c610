#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/condensed.hpp"
#include "gridnlp/ipm/filter.hpp"
#include "gridnlp/ipm/full_kkt.hpp"
#include "gridnlp/ipm/iterate.hpp"
#include "gridnlp/ipm/lifted.hpp"
#include "gridnlp/ipm/restoration.hpp"

namespace gridnlp::ipm {

enum class SolveStatus {
  solved,          // scaled optimality error at mu=0 below tolerance
  max_iterations,  // iteration budget exhausted
  infeasible,      // feasibility restoration could not reduce the violation
  unrecoverable,   // regularization exhausted or evaluation failure
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unrecoverable: return "unrecoverable";
  }
  return "unknown";
}

// One row per visited iterate; the step fields describe the step that
// produced the row's point (zeros on the first row).
struct IterationLog {
  int iter = 0;
  double objective = 0.0;
  double theta = 0.0;  // ||g - s||_1
  double stat = 0.0, feas = 0.0, comp = 0.0;  // scaled, at mu = 0
  double mu = 0.0;
  double alpha_primal = 0.0, alpha_dual = 0.0;
  double delta_w = 0.0;
  int retries = 0, trials = 0;
};

// Observer payload captured once per iteration after the direction is
// computed and the step decision made.  Vectors are deep copies.
struct StepRecord {
  int iter = 0;
  double mu = 0.0, delta_w = 0.0, delta_c = 0.0;
  Iterate iterate;      // point the direction was computed at
  Residuals residuals;  // residuals at that point and mu
  Direction direction;  // plus convention
  sparse::Inertia inertia;  // of the accepted factorization
  index_t system_dim = 0;   // condensed dimension (or full system dimension)
  double alpha_primal = 0.0, alpha_dual = 0.0;
  bool accepted = false;  // false when the iteration fell into restoration
};

struct SolverConfig {
  double tol = 1e-4;
  double mu_init = 0.1;
  int max_iter = 500;
  int refine_passes = 1;
  double pivot_floor_rel = 1e-12;
  bool use_full_kkt = false;  // dense unreduced system (small problems only)
  int max_restorations = 10;
  int restoration_max_iter = 200;
  double restoration_improve = 0.9;  // required violation reduction factor
  double alpha_min = 1e-12;
  std::function<void(const StepRecord&)> observer;
  bool in_restoration = false;  // internal: recursion guard
};

struct SolveResult {
  SolveStatus status = SolveStatus::unrecoverable;
  int iterations = 0;
  double objective = 0.0;
  KktError error;  // scaled, at mu = 0, final point
  double theta = 0.0;
  std::vector<double> x, s, y;
  std::vector<double> zlx, zux, zls, zus;
  std::vector<IterationLog> log;
  int restorations = 0;
  std::string note;
  bool ok() const { return status == SolveStatus::solved; }
};

// Filter line-search interior-point solver for the canonical lifted form.
// One instance per solve.
class IpmSolver {
public:
  IpmSolver(LiftedProblem& problem, SolverConfig config)
      : p_(&problem), cfg_(std::move(config)) {}

  SolveResult solve() {
    const index_t n = p_->n();
    const index_t m = p_->m();
    auto xl = p_->x_lower();
    auto xu = p_->x_upper();
    auto sl = p_->s_lower();
    auto su = p_->s_upper();

    SolveResult res;
    Iterate it;
    it.x.resize(static_cast<size_t>(n));
    for (index_t i = 0; i < n; ++i)
      it.x[static_cast<size_t>(i)] =
          push_interior(p_->x_start()[static_cast<size_t>(i)],
                        xl[static_cast<size_t>(i)], xu[static_cast<size_t>(i)]);
    std::vector<double> g(static_cast<size_t>(m));
    if (!p_->eval_g(it.x, g))
      throw Error("interior-point solve: constraint evaluation failed at the starting point");
    it.s.resize(static_cast<size_t>(m));
    for (index_t i = 0; i < m; ++i)
      it.s[static_cast<size_t>(i)] =
          push_interior(g[static_cast<size_t>(i)], sl[static_cast<size_t>(i)],
                        su[static_cast<size_t>(i)]);
    it.y.assign(static_cast<size_t>(m), 0.0);
    reset_bound_multipliers(it, xl, xu, sl, su);

    double mu = cfg_.mu_init;
    const double mu_floor = cfg_.tol / 10.0;
    const double theta0 = constraint_violation(g, it.s);
    const double theta_max = 1e4 * std::max(1.0, theta0);
    const double theta_min = 1e-4 * std::max(1.0, theta0);
    Filter filter;

    std::optional<CondensedKkt> kkt;
    std::optional<FullKkt> full;
    if (cfg_.use_full_kkt)
      full.emplace(n, m, p_->jac_rows(), p_->jac_cols(), p_->hess_rows(),
                   p_->hess_cols(), xl, xu, sl, su);
    else
      kkt.emplace(n, m, p_->jac_rows(), p_->jac_cols(), p_->hess_rows(),
                  p_->hess_cols(),
                  sparse::LdltOptions{cfg_.pivot_floor_rel});

    std::vector<double> grad(static_cast<size_t>(n));
    std::vector<double> jvals(static_cast<size_t>(p_->jac_nnz()));
    std::vector<double> hvals(static_cast<size_t>(p_->hess_nnz()));
    std::vector<double> hweights(static_cast<size_t>(m));
    std::vector<double> sigma_x, sigma_s, qx, qs;
    std::vector<double> x_trial(static_cast<size_t>(n)),
        s_trial(static_cast<size_t>(m)), g_trial(static_cast<size_t>(m));
    Residuals r0, r;
    Direction dir;
    double f = 0.0;
    double delta_w_last = 0.0;
    IterationLog step_info;  // of the step that produced the current point

    for (int iter = 0;; ++iter) {
      if (!p_->eval_f(it.x, f) || !p_->eval_grad(it.x, grad) ||
          !p_->eval_g(it.x, g) || !p_->eval_jac(it.x, jvals))
        return finish(res, it, SolveStatus::unrecoverable, iter, f, g,
                      "evaluation failure at an accepted point");

      compute_residuals(it, grad, g, p_->jac_rows(), p_->jac_cols(), jvals,
                        xl, xu, sl, su, 0.0, r0);
      const KktError e0 = kkt_error(it, r0, 0.0, xl, xu, sl, su);
      const double theta = constraint_violation(g, it.s);
      IterationLog row = step_info;
      row.iter = iter;
      row.objective = f;
      row.theta = theta;
      row.stat = e0.stat;
      row.feas = e0.feas;
      row.comp = e0.comp;
      row.mu = mu;
      res.log.push_back(row);
      res.error = e0;
      res.theta = theta;

      if (e0.overall() <= cfg_.tol)
        return finish(res, it, SolveStatus::solved, iter, f, g, "");
      if (iter >= cfg_.max_iter)
        return finish(res, it, SolveStatus::max_iterations, iter, f, g, "");

      compute_residuals(it, grad, g, p_->jac_rows(), p_->jac_cols(), jvals,
                        xl, xu, sl, su, mu, r);
      {
        KktError emu = kkt_error(it, r, mu, xl, xu, sl, su);
        const double kappa_eps = 10.0, kappa_mu = 0.2, theta_mu = 1.5;
        while (emu.overall() <= kappa_eps * mu) {
          const double mu_new = std::max(
              mu_floor, std::min(kappa_mu * mu, std::pow(mu, theta_mu)));
          if (mu_new >= mu) break;
          mu = mu_new;
          filter.reset();
          compute_residuals(it, grad, g, p_->jac_rows(), p_->jac_cols(),
                            jvals, xl, xu, sl, su, mu, r);
          emu = kkt_error(it, r, mu, xl, xu, sl, su);
        }
      }

      for (index_t i = 0; i < m; ++i)
        hweights[static_cast<size_t>(i)] = -it.y[static_cast<size_t>(i)];
      if (!p_->eval_hess(it.x, hweights, 1.0, hvals))
        return finish(res, it, SolveStatus::unrecoverable, iter, f, g,
                      "Hessian evaluation failure");

      bound_condensation(it, r, xl, xu, sl, su, sigma_x, sigma_s, qx, qs);

      // Inertia-corrected factorization.
      double delta_w = 0.0, delta_c = 0.0;
      int retries = 0;
      sparse::Inertia used_inertia;
      bool factored = false;
      if (!cfg_.use_full_kkt) kkt->set_jacobian(jvals);
      while (!factored) {
        bool ok;
        bool rank_trouble;
        if (cfg_.use_full_kkt) {
          full->assemble(hvals, jvals, it, r, delta_w, delta_c);
          const bool nonsingular = full->factorize();
          used_inertia = full->inertia();
          ok = nonsingular && used_inertia == full->expected_inertia();
          rank_trouble = !nonsingular;
        } else {
          kkt->assemble(hvals, sigma_x, sigma_s, delta_w, delta_c);
          ok = kkt->factorize();
          used_inertia = kkt->inertia();
          rank_trouble = kkt->floored_pivots() > 0;
        }
        if (ok) {
          factored = true;
          break;
        }
        if (rank_trouble) delta_c = 1e-8 * std::pow(mu, 0.25);
        // Seed the first retry from the last successful value, backed off by
        // 3; escalate by 8 on every further failure within this iteration.
        delta_w = (retries == 0)
                      ? (delta_w_last == 0.0 ? 1e-4
                                             : std::max(1e-20, delta_w_last / 3.0))
                      : delta_w * 8.0;
        ++retries;
        if (delta_w > 1e40)
          return finish(res, it, SolveStatus::unrecoverable, iter, f, g,
                        "inertia correction exhausted");
      }
      if (delta_w > 0.0) delta_w_last = delta_w;

      if (cfg_.use_full_kkt) {
        full->solve(dir);
      } else {
        kkt->solve(qx, qs, r.py, dir, cfg_.refine_passes);
        recover_bound_steps(it, r, xl, xu, sl, su, dir);
      }

      const double tau = std::max(0.99, 1.0 - mu);
      const StepSizes amax = fraction_to_boundary(it, dir, xl, xu, sl, su, tau);

      // Filter line search along the primal direction.
      const double phi = barrier_value(f, it.x, it.s, xl, xu, sl, su, mu);
      const double slope = barrier_slope(grad, it, dir, xl, xu, sl, su, mu);
      const double gamma_theta = 1e-5, gamma_phi = 1e-8, eta_phi = 1e-8;
      const double delta_sw = 1.0, s_theta = 1.1, s_phi = 2.3;
      double alpha = amax.primal;
      int trials = 0;
      bool accepted = false;
      bool augment = false;
      double f_t = 0.0;
      while (alpha >= cfg_.alpha_min) {
        ++trials;
        for (index_t i = 0; i < n; ++i)
          x_trial[static_cast<size_t>(i)] =
              it.x[static_cast<size_t>(i)] + alpha * dir.dx[static_cast<size_t>(i)];
        for (index_t i = 0; i < m; ++i)
          s_trial[static_cast<size_t>(i)] =
              it.s[static_cast<size_t>(i)] + alpha * dir.ds[static_cast<size_t>(i)];
        if (!p_->eval_f(x_trial, f_t) || !p_->eval_g(x_trial, g_trial)) {
          alpha *= 0.5;
          continue;
        }
        const double theta_t = constraint_violation(g_trial, s_trial);
        const double phi_t =
            barrier_value(f_t, x_trial, s_trial, xl, xu, sl, su, mu);
        if (!std::isfinite(theta_t) || !std::isfinite(phi_t) ||
            theta_t > theta_max || !filter.acceptable(theta_t, phi_t)) {
          alpha *= 0.5;
          continue;
        }
        const bool switching =
            theta <= theta_min && slope < 0.0 &&
            alpha * std::pow(-slope, s_phi) > delta_sw * std::pow(theta, s_theta);
        if (switching) {
          if (phi_t <= phi + eta_phi * alpha * slope) {
            accepted = true;
            break;
          }
        } else {
          if (theta_t <= (1.0 - gamma_theta) * theta ||
              phi_t <= phi - gamma_phi * theta) {
            accepted = true;
            augment = true;
            break;
          }
        }
        alpha *= 0.5;
      }

      if (cfg_.observer) {
        StepRecord rec;
        rec.iter = iter;
        rec.mu = mu;
        rec.delta_w = delta_w;
        rec.delta_c = delta_c;
        rec.iterate = it;
        rec.residuals = r;
        rec.direction = dir;
        rec.inertia = used_inertia;
        rec.system_dim = cfg_.use_full_kkt ? full->dim() : kkt->dim();
        rec.alpha_primal = accepted ? alpha : 0.0;
        rec.alpha_dual = accepted ? amax.dual : 0.0;
        rec.accepted = accepted;
        cfg_.observer(rec);
      }

      if (!accepted) {
        if (cfg_.in_restoration)
          return finish(res, it, SolveStatus::infeasible, iter, f, g,
                        "line search failed inside restoration");
        ++res.restorations;
        if (res.restorations > cfg_.max_restorations)
          return finish(res, it, SolveStatus::infeasible, iter, f, g,
                        "restoration budget exhausted");
        if (!restore(it, mu, theta, g, res))
          return finish(res, it, SolveStatus::infeasible, iter, f, g,
                        "feasibility restoration failed");
        reset_bound_multipliers(it, xl, xu, sl, su);
        filter.reset();
        step_info = IterationLog{};
        step_info.retries = retries;
        continue;
      }

      for (index_t i = 0; i < n; ++i)
        it.x[static_cast<size_t>(i)] += alpha * dir.dx[static_cast<size_t>(i)];
      for (index_t i = 0; i < m; ++i) {
        it.s[static_cast<size_t>(i)] += alpha * dir.ds[static_cast<size_t>(i)];
        it.y[static_cast<size_t>(i)] += alpha * dir.dy[static_cast<size_t>(i)];
      }
      const double ad = amax.dual;
      for (index_t i = 0; i < n; ++i) {
        it.zlx[static_cast<size_t>(i)] += ad * dir.dzlx[static_cast<size_t>(i)];
        it.zux[static_cast<size_t>(i)] += ad * dir.dzux[static_cast<size_t>(i)];
      }
      for (index_t i = 0; i < m; ++i) {
        it.zls[static_cast<size_t>(i)] += ad * dir.dzls[static_cast<size_t>(i)];
        it.zus[static_cast<size_t>(i)] += ad * dir.dzus[static_cast<size_t>(i)];
      }
      clip_multipliers(it, xl, xu, sl, su, mu);
      if (augment) filter.add(theta, phi, gamma_theta, gamma_phi);

      step_info = IterationLog{};
      step_info.alpha_primal = alpha;
      step_info.alpha_dual = ad;
      step_info.delta_w = delta_w;
      step_info.retries = retries;
      step_info.trials = trials;
    }
  }

private:
  static void reset_bound_multipliers(Iterate& it, std::span<const double> xl,
                                      std::span<const double> xu,
                                      std::span<const double> sl,
                                      std::span<const double> su) {
    const size_t n = it.x.size();
    const size_t m = it.s.size();
    it.zlx.assign(n, 0.0);
    it.zux.assign(n, 0.0);
    it.zls.assign(m, 0.0);
    it.zus.assign(m, 0.0);
    for (size_t i = 0; i < n; ++i) {
      if (has_lower(xl[i])) it.zlx[i] = 1.0;
      if (has_upper(xu[i])) it.zux[i] = 1.0;
    }
    for (size_t i = 0; i < m; ++i) {
      if (has_lower(sl[i])) it.zls[i] = 1.0;
      if (has_upper(su[i])) it.zus[i] = 1.0;
    }
  }

  static void clip_multipliers(Iterate& it, std::span<const double> xl,
                               std::span<const double> xu,
                               std::span<const double> sl,
                               std::span<const double> su, double mu) {
    const double kappa = 1e10;
    for (size_t i = 0; i < it.x.size(); ++i) {
      if (has_lower(xl[i]))
        it.zlx[i] = clip_multiplier(it.zlx[i], it.x[i] - xl[i], mu, kappa);
      if (has_upper(xu[i]))
        it.zux[i] = clip_multiplier(it.zux[i], xu[i] - it.x[i], mu, kappa);
    }
    for (size_t i = 0; i < it.s.size(); ++i) {
      if (has_lower(sl[i]))
        it.zls[i] = clip_multiplier(it.zls[i], it.s[i] - sl[i], mu, kappa);
      if (has_upper(su[i]))
        it.zus[i] = clip_multiplier(it.zus[i], su[i] - it.s[i], mu, kappa);
    }
  }

  // Runs the elastic restoration problem through a fresh solver; on success
  // installs the restored (x, s) into `it` and returns true.
  bool restore(Iterate& it, double mu, double theta_entry,
               std::vector<double>& g, SolveResult& res) {
    RestorationNlp rnlp(*p_, it.x, it.s, std::sqrt(mu));
    LiftedProblem rlift(rnlp, cfg_.tol);
    SolverConfig rcfg = cfg_;
    rcfg.observer = nullptr;
    rcfg.in_restoration = true;
    rcfg.max_iter = cfg_.restoration_max_iter;
    rcfg.use_full_kkt = cfg_.use_full_kkt;
    IpmSolver rsolver(rlift, rcfg);
    SolveResult rres = rsolver.solve();
    if (rres.status != SolveStatus::solved &&
        rres.status != SolveStatus::max_iterations)
      return false;
    const index_t n = p_->n();
    const index_t m = p_->m();
    std::vector<double> x_new(rres.x.begin(), rres.x.begin() + n);
    std::vector<double> s_new(rres.x.begin() + n, rres.x.begin() + n + m);
    std::vector<double> g_new(static_cast<size_t>(m));
    if (!p_->eval_g(x_new, g_new)) return false;
    const double theta_new = constraint_violation(g_new, s_new);
    if (!(theta_new <= cfg_.restoration_improve * theta_entry)) return false;
    it.x = std::move(x_new);
    // Keep slacks strictly interior relative to their boxes.
    auto sl = p_->s_lower();
    auto su = p_->s_upper();
    for (index_t i = 0; i < m; ++i)
      it.s[static_cast<size_t>(i)] = push_interior(
          s_new[static_cast<size_t>(i)], sl[static_cast<size_t>(i)],
          su[static_cast<size_t>(i)]);
    std::fill(it.y.begin(), it.y.end(), 0.0);
    g = std::move(g_new);
    res.note = "feasibility restoration invoked";
    return true;
  }

  SolveResult& finish(SolveResult& res, Iterate& it, SolveStatus status,
                      int iter, double f, const std::vector<double>& g,
                      const std::string& note) {
    res.status = status;
    res.iterations = iter;
    res.objective = f;
    res.x = it.x;
    res.s = it.s;
    res.y = it.y;
    res.zlx = it.zlx;
    res.zux = it.zux;
    res.zls = it.zls;
    res.zus = it.zus;
    if (!note.empty()) res.note = note;
    (void)g;
    return res;
  }

  LiftedProblem* p_;
  SolverConfig cfg_;
};

// Convenience wrapper: lift a general NLP and solve it.
inline SolveResult solve_nlp(NlpProblem& nlp, const SolverConfig& cfg,
                             bool absolute_relaxation = false) {
  LiftedProblem lifted(nlp, cfg.tol, absolute_relaxation);
  IpmSolver solver(lifted, cfg);
  SolveResult res = solver.solve();
  // Map the free-variable solution back to the full variable space.
  std::vector<double> x_full(static_cast<size_t>(nlp.n_vars()));
  lifted.to_full(res.x, x_full);
  res.x = std::move(x_full);
  return res;
}

}  // namespace gridnlp::ipm
