#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gridnlp/power/network.hpp"
#include "gridnlp/power/opf.hpp"

namespace gridnlp::power {

// Worst violation of one constraint family, raw and after scaling.
// Equality rows are scaled by 2*max(1, |rhs|): a solve at tolerance eps
// relaxes each equality by eps*max(1, |rhs|) and drives the remaining
// residual below eps, so 2*eps*max(1, |rhs|) is the guaranteed band.
// Inequality rows are scaled by max(1, |violated bound|).
struct FamilyCheck {
  double raw = 0.0;
  double scaled = 0.0;

  void equality(double value, double rhs) {
    const double viol = std::abs(value - rhs);
    raw = std::max(raw, viol);
    scaled = std::max(scaled, viol / (2.0 * std::max(1.0, std::abs(rhs))));
  }
  void box(double value, double lo, double hi) {
    if (lo == hi) {
      equality(value, lo);
      return;
    }
    if (value < lo) {
      raw = std::max(raw, lo - value);
      scaled = std::max(scaled, (lo - value) / std::max(1.0, std::abs(lo)));
    }
    if (value > hi) {
      raw = std::max(raw, value - hi);
      scaled = std::max(scaled, (value - hi) / std::max(1.0, std::abs(hi)));
    }
  }
};

struct ViolationReport {
  FamilyCheck balance_p, balance_q, flow_p, flow_q;
  FamilyCheck thermal, bounds, angle, ramp;
  double tol = 0.0;
  bool pass = false;

  double worst_scaled() const {
    double w = 0.0;
    for (const FamilyCheck* f :
         {&balance_p, &balance_q, &flow_p, &flow_q, &thermal, &bounds, &angle,
          &ramp})
      w = std::max(w, f->scaled);
    return w;
  }
};

// Re-evaluates every constraint family as straight loops over the network
// arrays — an independent encoding of the same dispatch physics used to
// cross-check model construction and solver output.
inline ViolationReport validate_solution(const MultiPeriodCase& mpc,
                                         const DispatchSolution& d,
                                         double tol) {
  const NetworkData& net = mpc.network;
  const index_t T = mpc.periods();
  const index_t N = net.n_buses(), L = net.n_lines(), G = net.n_generators(),
                D = net.n_loads();
  if (d.periods != T || static_cast<index_t>(d.v.size()) != N * T ||
      static_cast<index_t>(d.pg.size()) != G * T ||
      static_cast<index_t>(d.p.size()) != L * T)
    throw Error("validate_solution: dispatch shape mismatch");

  ViolationReport rep;
  rep.tol = tol;
  auto at = [T](const std::vector<double>& a, index_t e, index_t t) {
    return a[static_cast<std::size_t>(e) * T + t];
  };

  for (index_t t = 0; t < T; ++t) {
    // Bus balance: accumulate flows and injections, then subtract demand.
    std::vector<double> mis_p(N, 0.0), mis_q(N, 0.0);
    for (index_t l = 0; l < L; ++l) {
      const Line& ln = net.lines[l];
      mis_p[ln.to] += at(d.p, l, t);
      mis_p[ln.from] -= at(d.p, l, t);
      mis_q[ln.to] += at(d.q, l, t);
      mis_q[ln.from] -= at(d.q, l, t);
    }
    for (index_t g = 0; g < G; ++g) {
      mis_p[net.generators[g].bus] += at(d.pg, g, t);
      mis_q[net.generators[g].bus] += at(d.qg, g, t);
    }
    for (index_t j = 0; j < D; ++j) {
      mis_p[net.loads[j].bus] -= mpc.pd(t, j);
      mis_q[net.loads[j].bus] -= mpc.qd(t, j);
    }
    for (index_t n = 0; n < N; ++n) {
      rep.balance_p.equality(mis_p[n], 0.0);
      rep.balance_q.equality(mis_q[n], 0.0);
    }

    for (index_t l = 0; l < L; ++l) {
      const Line& ln = net.lines[l];
      const double dth = at(d.th, ln.from, t) - at(d.th, ln.to, t);
      const LineFlow f =
          line_flow(ln, at(d.v, ln.from, t), at(d.v, ln.to, t), dth);
      rep.flow_p.equality(at(d.p, l, t) - f.p, 0.0);
      rep.flow_q.equality(at(d.q, l, t) - f.q, 0.0);
      if (ln.s_max < kInf) {
        const double s2 = at(d.p, l, t) * at(d.p, l, t) +
                          at(d.q, l, t) * at(d.q, l, t);
        rep.thermal.box(s2, -kInf, ln.s_max * ln.s_max);
      }
      rep.angle.box(dth, ln.angle_min, ln.angle_max);
    }

    for (index_t g = 0; g < G; ++g) {
      rep.bounds.box(at(d.pg, g, t), net.generators[g].p_min,
                     net.generators[g].p_max);
      rep.bounds.box(at(d.qg, g, t), net.generators[g].q_min,
                     net.generators[g].q_max);
    }
    for (index_t n = 0; n < N; ++n) {
      rep.bounds.box(at(d.v, n, t), net.buses[n].v_min, net.buses[n].v_max);
      if (n == net.reference_bus) rep.bounds.box(at(d.th, n, t), 0.0, 0.0);
    }

    if (t >= 1)
      for (index_t g = 0; g < G; ++g) {
        const double r = net.generators[g].ramp;
        if (r < kInf)
          rep.ramp.box(at(d.pg, g, t) - at(d.pg, g, t - 1), -r, r);
      }
  }

  rep.pass = rep.worst_scaled() <= tol;
  return rep;
}

}  // namespace gridnlp::power
