#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"

namespace gridnlp::ipm {

// Primal-dual point for the canonical form
//   min f(x)  s.t.  g(x) - s = 0,  xl <= x <= xu,  sl <= s <= su.
// y are the equality multipliers; z* are the (nonnegative) bound multipliers.
// Entries of z* whose bound is absent are identically zero.
struct Iterate {
  std::vector<double> x, s, y;
  std::vector<double> zlx, zux, zls, zus;
};

// Search direction in "plus" convention: every component updates as
// w <- w + alpha * d (primal and y with the primal step, z with the dual step).
struct Direction {
  std::vector<double> dx, ds, dy;
  std::vector<double> dzlx, dzux, dzls, dzus;
};

// First-order residuals of the perturbed KKT conditions at a given mu:
//   px   = grad f - A^T y - zlx + zux
//   ps   = y - zls + zus
//   py   = g(x) - s
//   pzl* = Z (w - wl) - mu,  pzu* = Z (wu - w) - mu   (zero where no bound)
struct Residuals {
  std::vector<double> px, ps, py;
  std::vector<double> pzlx, pzux, pzls, pzus;
};

inline bool has_lower(double b) { return b > -kInf; }
inline bool has_upper(double b) { return b < kInf; }

// A^T y accumulated from a coordinate-format Jacobian.
inline void jac_transpose_multiply(std::span<const index_t> rows,
                                   std::span<const index_t> cols,
                                   std::span<const double> vals,
                                   std::span<const double> y,
                                   std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (size_t k = 0; k < vals.size(); ++k)
    out[static_cast<size_t>(cols[k])] +=
        vals[k] * y[static_cast<size_t>(rows[k])];
}

// A x accumulated from a coordinate-format Jacobian.
inline void jac_multiply(std::span<const index_t> rows,
                         std::span<const index_t> cols,
                         std::span<const double> vals,
                         std::span<const double> x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (size_t k = 0; k < vals.size(); ++k)
    out[static_cast<size_t>(rows[k])] +=
        vals[k] * x[static_cast<size_t>(cols[k])];
}

inline void compute_residuals(const Iterate& it, std::span<const double> grad,
                              std::span<const double> g,
                              std::span<const index_t> jac_rows,
                              std::span<const index_t> jac_cols,
                              std::span<const double> jac_vals,
                              std::span<const double> xl,
                              std::span<const double> xu,
                              std::span<const double> sl,
                              std::span<const double> su, double mu,
                              Residuals& r) {
  const size_t n = it.x.size();
  const size_t m = it.s.size();
  r.px.resize(n);
  r.ps.resize(m);
  r.py.resize(m);
  r.pzlx.resize(n);
  r.pzux.resize(n);
  r.pzls.resize(m);
  r.pzus.resize(m);

  jac_transpose_multiply(jac_rows, jac_cols, jac_vals, it.y, r.px);
  for (size_t i = 0; i < n; ++i)
    r.px[i] = grad[i] - r.px[i] - it.zlx[i] + it.zux[i];
  for (size_t i = 0; i < m; ++i) r.ps[i] = it.y[i] - it.zls[i] + it.zus[i];
  for (size_t i = 0; i < m; ++i) r.py[i] = g[i] - it.s[i];
  for (size_t i = 0; i < n; ++i) {
    r.pzlx[i] = has_lower(xl[i]) ? it.zlx[i] * (it.x[i] - xl[i]) - mu : 0.0;
    r.pzux[i] = has_upper(xu[i]) ? it.zux[i] * (xu[i] - it.x[i]) - mu : 0.0;
  }
  for (size_t i = 0; i < m; ++i) {
    r.pzls[i] = has_lower(sl[i]) ? it.zls[i] * (it.s[i] - sl[i]) - mu : 0.0;
    r.pzus[i] = has_upper(su[i]) ? it.zus[i] * (su[i] - it.s[i]) - mu : 0.0;
  }
}

// Condensed diagonal Sigma = sum of z / gap over the present bounds, and the
// reduced right-hand sides
//   qx = px + pzlx/(x-xl) - pzux/(xu-x),   qs analogously.
inline void bound_condensation(const Iterate& it, const Residuals& r,
                               std::span<const double> xl,
                               std::span<const double> xu,
                               std::span<const double> sl,
                               std::span<const double> su,
                               std::vector<double>& sigma_x,
                               std::vector<double>& sigma_s,
                               std::vector<double>& qx,
                               std::vector<double>& qs) {
  const size_t n = it.x.size();
  const size_t m = it.s.size();
  sigma_x.assign(n, 0.0);
  sigma_s.assign(m, 0.0);
  qx.assign(n, 0.0);
  qs.assign(m, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double q = r.px[i];
    if (has_lower(xl[i])) {
      const double gap = it.x[i] - xl[i];
      sigma_x[i] += it.zlx[i] / gap;
      q += r.pzlx[i] / gap;
    }
    if (has_upper(xu[i])) {
      const double gap = xu[i] - it.x[i];
      sigma_x[i] += it.zux[i] / gap;
      q -= r.pzux[i] / gap;
    }
    qx[i] = q;
  }
  for (size_t i = 0; i < m; ++i) {
    double q = r.ps[i];
    if (has_lower(sl[i])) {
      const double gap = it.s[i] - sl[i];
      sigma_s[i] += it.zls[i] / gap;
      q += r.pzls[i] / gap;
    }
    if (has_upper(su[i])) {
      const double gap = su[i] - it.s[i];
      sigma_s[i] += it.zus[i] / gap;
      q -= r.pzus[i] / gap;
    }
    qs[i] = q;
  }
}

// Largest alpha in (0,1] keeping the primal gaps at least (1-tau) of their
// current size, and the dual variables at least (1-tau) of theirs.
struct StepSizes {
  double primal = 1.0;
  double dual = 1.0;
};

inline double boundary_limit_lower(double w, double bound, double d,
                                   double tau, double alpha) {
  // require w + alpha d >= bound + (1-tau)(w - bound)
  if (d < 0.0) alpha = std::min(alpha, -tau * (w - bound) / d);
  return alpha;
}

inline double boundary_limit_upper(double w, double bound, double d,
                                   double tau, double alpha) {
  if (d > 0.0) alpha = std::min(alpha, tau * (bound - w) / d);
  return alpha;
}

inline StepSizes fraction_to_boundary(const Iterate& it, const Direction& d,
                                      std::span<const double> xl,
                                      std::span<const double> xu,
                                      std::span<const double> sl,
                                      std::span<const double> su, double tau) {
  StepSizes a;
  const size_t n = it.x.size();
  const size_t m = it.s.size();
  for (size_t i = 0; i < n; ++i) {
    if (has_lower(xl[i]))
      a.primal = boundary_limit_lower(it.x[i], xl[i], d.dx[i], tau, a.primal);
    if (has_upper(xu[i]))
      a.primal = boundary_limit_upper(it.x[i], xu[i], d.dx[i], tau, a.primal);
  }
  for (size_t i = 0; i < m; ++i) {
    if (has_lower(sl[i]))
      a.primal = boundary_limit_lower(it.s[i], sl[i], d.ds[i], tau, a.primal);
    if (has_upper(su[i]))
      a.primal = boundary_limit_upper(it.s[i], su[i], d.ds[i], tau, a.primal);
  }
  auto dual_limit = [&](const std::vector<double>& z,
                        const std::vector<double>& dz, auto present) {
    for (size_t i = 0; i < z.size(); ++i)
      if (present(i) && dz[i] < 0.0)
        a.dual = std::min(a.dual, -tau * z[i] / dz[i]);
  };
  dual_limit(it.zlx, d.dzlx, [&](size_t i) { return has_lower(xl[i]); });
  dual_limit(it.zux, d.dzux, [&](size_t i) { return has_upper(xu[i]); });
  dual_limit(it.zls, d.dzls, [&](size_t i) { return has_lower(sl[i]); });
  dual_limit(it.zus, d.dzus, [&](size_t i) { return has_upper(su[i]); });
  return a;
}

// Barrier objective phi_mu = f - mu * sum log(gaps) over the present bounds.
inline double barrier_value(double f, std::span<const double> x,
                            std::span<const double> s,
                            std::span<const double> xl,
                            std::span<const double> xu,
                            std::span<const double> sl,
                            std::span<const double> su, double mu) {
  double logs = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (has_lower(xl[i])) logs += std::log(x[i] - xl[i]);
    if (has_upper(xu[i])) logs += std::log(xu[i] - x[i]);
  }
  for (size_t i = 0; i < s.size(); ++i) {
    if (has_lower(sl[i])) logs += std::log(s[i] - sl[i]);
    if (has_upper(su[i])) logs += std::log(su[i] - s[i]);
  }
  return f - mu * logs;
}

// Directional derivative of phi_mu along (dx, ds).
inline double barrier_slope(std::span<const double> grad, const Iterate& it,
                            const Direction& d, std::span<const double> xl,
                            std::span<const double> xu,
                            std::span<const double> sl,
                            std::span<const double> su, double mu) {
  double slope = 0.0;
  for (size_t i = 0; i < it.x.size(); ++i) {
    slope += grad[i] * d.dx[i];
    if (has_lower(xl[i])) slope -= mu * d.dx[i] / (it.x[i] - xl[i]);
    if (has_upper(xu[i])) slope += mu * d.dx[i] / (xu[i] - it.x[i]);
  }
  for (size_t i = 0; i < it.s.size(); ++i) {
    if (has_lower(sl[i])) slope -= mu * d.ds[i] / (it.s[i] - sl[i]);
    if (has_upper(su[i])) slope += mu * d.ds[i] / (su[i] - it.s[i]);
  }
  return slope;
}

// Constraint violation theta = ||g(x) - s||_1.
inline double constraint_violation(std::span<const double> g,
                                   std::span<const double> s) {
  double t = 0.0;
  for (size_t i = 0; i < g.size(); ++i) t += std::abs(g[i] - s[i]);
  return t;
}

// Scaled optimality error; the overall error is max(stat, feas, comp).
struct KktError {
  double stat = 0.0;  // max(||px||_inf, ||ps||_inf) / s_d
  double feas = 0.0;  // ||g - s||_inf
  double comp = 0.0;  // max |z * gap - mu| / s_c
  double overall() const { return std::max(stat, std::max(feas, comp)); }
};

inline KktError kkt_error(const Iterate& it, const Residuals& r, double mu,
                          std::span<const double> xl,
                          std::span<const double> xu,
                          std::span<const double> sl,
                          std::span<const double> su) {
  double z_sum = 0.0;
  index_t z_count = 0;
  auto tally = [&](const std::vector<double>& z, auto present) {
    for (size_t i = 0; i < z.size(); ++i)
      if (present(i)) {
        z_sum += std::abs(z[i]);
        ++z_count;
      }
  };
  tally(it.zlx, [&](size_t i) { return has_lower(xl[i]); });
  tally(it.zux, [&](size_t i) { return has_upper(xu[i]); });
  tally(it.zls, [&](size_t i) { return has_lower(sl[i]); });
  tally(it.zus, [&](size_t i) { return has_upper(su[i]); });
  const double y_sum = one_norm(it.y);
  const index_t m = static_cast<index_t>(it.y.size());
  const double s_max = 100.0;
  const double s_d =
      std::max(s_max, (y_sum + z_sum) / std::max<index_t>(1, m + z_count)) /
      s_max;
  const double s_c =
      std::max(s_max, z_sum / std::max<index_t>(1, z_count)) / s_max;

  KktError e;
  e.stat = std::max(inf_norm(r.px), inf_norm(r.ps)) / s_d;
  e.feas = inf_norm(r.py);
  double comp = 0.0;
  auto comp_term = [&](double z, double gap) {
    comp = std::max(comp, std::abs(z * gap - mu));
  };
  for (size_t i = 0; i < it.x.size(); ++i) {
    if (has_lower(xl[i])) comp_term(it.zlx[i], it.x[i] - xl[i]);
    if (has_upper(xu[i])) comp_term(it.zux[i], xu[i] - it.x[i]);
  }
  for (size_t i = 0; i < it.s.size(); ++i) {
    if (has_lower(sl[i])) comp_term(it.zls[i], it.s[i] - sl[i]);
    if (has_upper(su[i])) comp_term(it.zus[i], su[i] - it.s[i]);
  }
  e.comp = comp / s_c;
  return e;
}

// Pushes a start point strictly inside its box: two-sided boxes move the
// point at least 1e-2 of the width from each end (capped at half width);
// one-sided bounds push by 1e-2 * max(1, |bound|).
inline double push_interior(double v, double lo, double hi) {
  const bool hl = has_lower(lo);
  const bool hu = has_upper(hi);
  if (hl && hu) {
    const double pad = std::min(1e-2 * (hi - lo), 0.5 * (hi - lo));
    return std::clamp(v, lo + pad, hi - pad);
  }
  if (hl) {
    const double pad = 1e-2 * std::max(1.0, std::abs(lo));
    return std::max(v, lo + pad);
  }
  if (hu) {
    const double pad = 1e-2 * std::max(1.0, std::abs(hi));
    return std::min(v, hi - pad);
  }
  return v;
}

// Multiplier safeguard: clip z into [mu/(kappa*gap), kappa*mu/gap].
inline double clip_multiplier(double z, double gap, double mu, double kappa) {
  const double hi = kappa * mu / gap;
  const double lo = mu / (kappa * gap);
  return std::max(std::min(z, hi), lo);
}

}  // namespace gridnlp::ipm
