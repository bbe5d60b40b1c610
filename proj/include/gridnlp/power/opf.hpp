#pragma once

#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "gridnlp/model/pattern_model.hpp"
#include "gridnlp/power/network.hpp"

namespace gridnlp::power {

// Flat index bookkeeping for the dispatch model.  Variables come in six
// blocks (pg, qg, p, q, v, th), each entity-major: index = entity * T + t.
// Constraint rows follow in seven blocks with the same inner layout.
struct OpfLayout {
  index_t periods = 0;
  index_t n_bus = 0, n_line = 0, n_gen = 0, n_load = 0;

  // variable block offsets
  index_t pg0 = 0, qg0 = 0, p0 = 0, q0 = 0, v0 = 0, th0 = 0;
  index_t n_vars = 0;

  // row block offsets
  index_t bal_p0 = 0, bal_q0 = 0, flow_p0 = 0, flow_q0 = 0;
  index_t thermal0 = 0, angle0 = 0, ramp0 = 0;
  index_t n_rows = 0;

  std::vector<index_t> thermal_lines;  // lines carrying a rating row
  std::vector<index_t> ramp_gens;      // generators carrying ramp rows

  index_t pg(index_t g, index_t t) const { return pg0 + g * periods + t; }
  index_t qg(index_t g, index_t t) const { return qg0 + g * periods + t; }
  index_t p(index_t l, index_t t) const { return p0 + l * periods + t; }
  index_t q(index_t l, index_t t) const { return q0 + l * periods + t; }
  index_t v(index_t n, index_t t) const { return v0 + n * periods + t; }
  index_t th(index_t n, index_t t) const { return th0 + n * periods + t; }

  index_t balance_p_row(index_t n, index_t t) const {
    return bal_p0 + n * periods + t;
  }
  index_t balance_q_row(index_t n, index_t t) const {
    return bal_q0 + n * periods + t;
  }
  index_t flow_p_row(index_t l, index_t t) const {
    return flow_p0 + l * periods + t;
  }
  index_t flow_q_row(index_t l, index_t t) const {
    return flow_q0 + l * periods + t;
  }
  index_t thermal_row(index_t slot, index_t t) const {
    return thermal0 + slot * periods + t;
  }
  index_t angle_row(index_t l, index_t t) const {
    return angle0 + l * periods + t;
  }
  index_t ramp_row(index_t slot, index_t step) const {
    return ramp0 + slot * (periods - 1) + step;  // step = t - 1
  }
};

// Solution arrays in the layout's entity-major order, one value per
// (entity, period).
struct DispatchSolution {
  index_t periods = 0;
  std::vector<double> pg, qg, p, q, v, th;
  double objective = 0.0;
};

namespace detail {

// Incremental PatternData builder so record pushes read like table rows.
struct Records {
  model::PatternData d;
  Records(index_t n_var_fields, index_t n_real_fields) {
    d.n_var_fields = n_var_fields;
    d.n_real_fields = n_real_fields;
  }
  void add(std::initializer_list<index_t> vars,
           std::initializer_list<double> reals, index_t row = -1) {
    d.vars.insert(d.vars.end(), vars.begin(), vars.end());
    d.reals.insert(d.reals.end(), reals.begin(), reals.end());
    if (row >= 0) d.rows.push_back(row);
    ++d.n_records;
  }
  model::PatternData take() { return std::move(d); }
};

}  // namespace detail

struct BuiltOpf {
  model::PatternModel model;
  OpfLayout layout;
};

// Assemble the multi-period dispatch NLP: quadratic generation cost, bus
// power balance, line-flow definitions in polar voltages, thermal ratings,
// angle-spread boxes, and inter-period ramp rows.  Each line carries one
// (p, q) flow pair that leaves the from-bus and arrives at the to-bus.
inline BuiltOpf build_multiperiod_opf(const MultiPeriodCase& mpc) {
  const NetworkData& net = mpc.network;
  const index_t T = mpc.periods();
  const index_t N = net.n_buses(), L = net.n_lines(), G = net.n_generators(),
                D = net.n_loads();
  if (net.reference_bus < 0 || net.reference_bus >= N)
    throw Error("opf: network has no reference bus");
  if (mpc.profile.n_loads != D)
    throw Error("opf: load profile does not match network loads");

  OpfLayout lay;
  lay.periods = T;
  lay.n_bus = N;
  lay.n_line = L;
  lay.n_gen = G;
  lay.n_load = D;
  for (index_t l = 0; l < L; ++l)
    if (net.lines[l].s_max < kInf) lay.thermal_lines.push_back(l);
  if (T >= 2)
    for (index_t g = 0; g < G; ++g)
      if (net.generators[g].ramp < kInf) lay.ramp_gens.push_back(g);
  const index_t LT = static_cast<index_t>(lay.thermal_lines.size());
  const index_t GR = static_cast<index_t>(lay.ramp_gens.size());

  model::PatternModel m;

  // --- variables --------------------------------------------------------
  auto spread = [T](auto per_entity, index_t count) {
    std::vector<double> out(static_cast<std::size_t>(count) * T);
    for (index_t e = 0; e < count; ++e)
      for (index_t t = 0; t < T; ++t)
        out[static_cast<std::size_t>(e) * T + t] = per_entity(e);
    return out;
  };

  lay.pg0 = 0;
  m.add_variable_block(
      "pg", {G, T},
      spread([&](index_t g) { return net.generators[g].p_min; }, G),
      spread([&](index_t g) { return net.generators[g].p_max; }, G),
      spread([&](index_t g) { return net.generators[g].p_start; }, G));
  lay.qg0 = lay.pg0 + G * T;
  m.add_variable_block(
      "qg", {G, T},
      spread([&](index_t g) { return net.generators[g].q_min; }, G),
      spread([&](index_t g) { return net.generators[g].q_max; }, G),
      spread([&](index_t g) { return net.generators[g].q_start; }, G));

  // Flow starts are evaluated from the stored voltage start point so the
  // flow-definition rows begin (numerically) satisfied.
  std::vector<double> p_start(L), q_start(L);
  for (index_t l = 0; l < L; ++l) {
    const Line& ln = net.lines[l];
    const LineFlow f =
        line_flow(ln, net.vm_start[ln.from], net.vm_start[ln.to],
                  net.va_start[ln.from] - net.va_start[ln.to]);
    p_start[l] = f.p;
    q_start[l] = f.q;
  }
  lay.p0 = lay.qg0 + G * T;
  m.add_variable_block("p", {L, T}, spread([](index_t) { return -kInf; }, L),
                       spread([](index_t) { return kInf; }, L),
                       spread([&](index_t l) { return p_start[l]; }, L));
  lay.q0 = lay.p0 + L * T;
  m.add_variable_block("q", {L, T}, spread([](index_t) { return -kInf; }, L),
                       spread([](index_t) { return kInf; }, L),
                       spread([&](index_t l) { return q_start[l]; }, L));

  lay.v0 = lay.q0 + L * T;
  m.add_variable_block(
      "v", {N, T}, spread([&](index_t n) { return net.buses[n].v_min; }, N),
      spread([&](index_t n) { return net.buses[n].v_max; }, N),
      spread([&](index_t n) { return net.vm_start[n]; }, N));
  lay.th0 = lay.v0 + N * T;
  {
    const index_t ref = net.reference_bus;
    auto lo = spread([&](index_t n) { return n == ref ? 0.0 : -kInf; }, N);
    auto hi = spread([&](index_t n) { return n == ref ? 0.0 : kInf; }, N);
    auto st =
        spread([&](index_t n) { return n == ref ? 0.0 : net.va_start[n]; }, N);
    m.add_variable_block("th", {N, T}, std::move(lo), std::move(hi),
                         std::move(st));
  }
  lay.n_vars = lay.th0 + N * T;

  // --- constraint blocks -------------------------------------------------
  lay.bal_p0 = 0;
  const model::RowBlock bal_p = m.add_constraint_block("balance_p", N * T, 0.0, 0.0);
  lay.bal_q0 = lay.bal_p0 + N * T;
  const model::RowBlock bal_q = m.add_constraint_block("balance_q", N * T, 0.0, 0.0);
  lay.flow_p0 = lay.bal_q0 + N * T;
  const model::RowBlock flow_p = m.add_constraint_block("flow_p", L * T, 0.0, 0.0);
  lay.flow_q0 = lay.flow_p0 + L * T;
  const model::RowBlock flow_q = m.add_constraint_block("flow_q", L * T, 0.0, 0.0);

  lay.thermal0 = lay.flow_q0 + L * T;
  std::vector<double> th_hi(static_cast<std::size_t>(LT) * T);
  for (index_t k = 0; k < LT; ++k) {
    const double s = net.lines[lay.thermal_lines[k]].s_max;
    for (index_t t = 0; t < T; ++t)
      th_hi[static_cast<std::size_t>(k) * T + t] = s * s;
  }
  const model::RowBlock thermal = m.add_constraint_block(
      "thermal", LT * T,
      std::vector<double>(static_cast<std::size_t>(LT) * T, -kInf),
      std::move(th_hi));

  lay.angle0 = lay.thermal0 + LT * T;
  std::vector<double> ang_lo(static_cast<std::size_t>(L) * T),
      ang_hi(static_cast<std::size_t>(L) * T);
  for (index_t l = 0; l < L; ++l)
    for (index_t t = 0; t < T; ++t) {
      ang_lo[static_cast<std::size_t>(l) * T + t] = net.lines[l].angle_min;
      ang_hi[static_cast<std::size_t>(l) * T + t] = net.lines[l].angle_max;
    }
  const model::RowBlock angle = m.add_constraint_block(
      "angle", L * T, std::move(ang_lo), std::move(ang_hi));

  lay.ramp0 = lay.angle0 + L * T;
  const index_t ramp_rows = GR * std::max<index_t>(T - 1, 0);
  std::vector<double> ramp_lo(ramp_rows), ramp_hi(ramp_rows);
  for (index_t k = 0; k < GR; ++k) {
    const double r = net.generators[lay.ramp_gens[k]].ramp;
    for (index_t s = 0; s < T - 1; ++s) {
      ramp_lo[static_cast<std::size_t>(k) * (T - 1) + s] = -r;
      ramp_hi[static_cast<std::size_t>(k) * (T - 1) + s] = r;
    }
  }
  const model::RowBlock ramp = m.add_constraint_block(
      "ramp", ramp_rows, std::move(ramp_lo), std::move(ramp_hi));
  lay.n_rows = lay.ramp0 + ramp_rows;

  using model::real;
  using model::var;

  // --- objective: sum of quadratic generation costs ----------------------
  {
    detail::Records rec(1, 3);
    for (index_t g = 0; g < G; ++g)
      for (index_t t = 0; t < T; ++t)
        rec.add({lay.pg(g, t)},
                {net.generators[g].c2, net.generators[g].c1,
                 net.generators[g].c0});
    m.add_objective_pattern(
        "generation_cost",
        real(0) * square(var(0)) + real(1) * var(0) + real(2), rec.take());
  }

  // --- bus balance: line flows, injections, withdrawals ------------------
  {
    detail::Records prec(1, 1), qrec(1, 1);
    for (index_t l = 0; l < L; ++l) {
      const Line& ln = net.lines[l];
      for (index_t t = 0; t < T; ++t) {
        prec.add({lay.p(l, t)}, {1.0}, ln.to * T + t);
        prec.add({lay.p(l, t)}, {-1.0}, ln.from * T + t);
        qrec.add({lay.q(l, t)}, {1.0}, ln.to * T + t);
        qrec.add({lay.q(l, t)}, {-1.0}, ln.from * T + t);
      }
    }
    const model::Expr signed_flow = real(0) * var(0);
    m.add_constraint_pattern("balance_p_flow", bal_p, signed_flow,
                             prec.take());
    m.add_constraint_pattern("balance_q_flow", bal_q, signed_flow,
                             qrec.take());
  }
  {
    detail::Records prec(1, 0), qrec(1, 0);
    for (index_t g = 0; g < G; ++g) {
      const index_t bus = net.generators[g].bus;
      for (index_t t = 0; t < T; ++t) {
        prec.add({lay.pg(g, t)}, {}, bus * T + t);
        qrec.add({lay.qg(g, t)}, {}, bus * T + t);
      }
    }
    m.add_constraint_pattern("balance_p_injection", bal_p, var(0),
                             prec.take());
    m.add_constraint_pattern("balance_q_injection", bal_q, var(0),
                             qrec.take());
  }
  {
    detail::Records prec(0, 1), qrec(0, 1);
    for (index_t j = 0; j < D; ++j) {
      const index_t bus = net.loads[j].bus;
      for (index_t t = 0; t < T; ++t) {
        prec.add({}, {mpc.pd(t, j)}, bus * T + t);
        qrec.add({}, {mpc.qd(t, j)}, bus * T + t);
      }
    }
    m.add_constraint_pattern("balance_p_load", bal_p, -real(0), prec.take());
    m.add_constraint_pattern("balance_q_load", bal_q, -real(0), qrec.take());
  }

  // --- flow definitions ---------------------------------------------------
  // Fields: var0 = flow, var1 = v_from, var2 = v_to, var3 = th_from,
  // var4 = th_to; real0 = G, real1 = B.
  {
    detail::Records prec(5, 2), qrec(5, 2);
    for (index_t l = 0; l < L; ++l) {
      const Line& ln = net.lines[l];
      for (index_t t = 0; t < T; ++t) {
        prec.add({lay.p(l, t), lay.v(ln.from, t), lay.v(ln.to, t),
                  lay.th(ln.from, t), lay.th(ln.to, t)},
                 {ln.g, ln.b}, l * T + t);
        qrec.add({lay.q(l, t), lay.v(ln.from, t), lay.v(ln.to, t),
                  lay.th(ln.from, t), lay.th(ln.to, t)},
                 {ln.g, ln.b}, l * T + t);
      }
    }
    const model::Expr dth = var(3) - var(4);
    m.add_constraint_pattern(
        "flow_p_definition", flow_p,
        var(0) - (real(0) * square(var(1)) -
                  var(1) * var(2) * (real(0) * cos(dth) + real(1) * sin(dth))),
        prec.take());
    m.add_constraint_pattern(
        "flow_q_definition", flow_q,
        var(0) - (-real(1) * square(var(1)) -
                  var(1) * var(2) * (real(0) * sin(dth) - real(1) * cos(dth))),
        qrec.take());
  }

  // --- ratings, angle spreads, ramping ------------------------------------
  if (LT > 0) {
    detail::Records rec(2, 0);
    for (index_t k = 0; k < LT; ++k) {
      const index_t l = lay.thermal_lines[k];
      for (index_t t = 0; t < T; ++t)
        rec.add({lay.p(l, t), lay.q(l, t)}, {}, k * T + t);
    }
    m.add_constraint_pattern("thermal_limit", thermal,
                             square(var(0)) + square(var(1)), rec.take());
  }
  {
    detail::Records rec(2, 0);
    for (index_t l = 0; l < L; ++l) {
      const Line& ln = net.lines[l];
      for (index_t t = 0; t < T; ++t)
        rec.add({lay.th(ln.from, t), lay.th(ln.to, t)}, {}, l * T + t);
    }
    m.add_constraint_pattern("angle_spread", angle, var(0) - var(1),
                             rec.take());
  }
  if (ramp_rows > 0) {
    detail::Records rec(2, 0);
    for (index_t k = 0; k < GR; ++k) {
      const index_t g = lay.ramp_gens[k];
      for (index_t t = 1; t < T; ++t)
        rec.add({lay.pg(g, t), lay.pg(g, t - 1)}, {}, k * (T - 1) + (t - 1));
    }
    m.add_constraint_pattern("ramp_step", ramp, var(0) - var(1), rec.take());
  }

  m.freeze();
  return BuiltOpf{std::move(m), std::move(lay)};
}

inline DispatchSolution extract_dispatch(const OpfLayout& lay,
                                         std::span<const double> x,
                                         double objective = 0.0) {
  if (static_cast<index_t>(x.size()) != lay.n_vars)
    throw Error("extract_dispatch: primal length mismatch");
  DispatchSolution d;
  d.periods = lay.periods;
  d.objective = objective;
  auto grab = [&](index_t offset, index_t count) {
    return std::vector<double>(x.begin() + offset, x.begin() + offset + count);
  };
  const index_t T = lay.periods;
  d.pg = grab(lay.pg0, lay.n_gen * T);
  d.qg = grab(lay.qg0, lay.n_gen * T);
  d.p = grab(lay.p0, lay.n_line * T);
  d.q = grab(lay.q0, lay.n_line * T);
  d.v = grab(lay.v0, lay.n_bus * T);
  d.th = grab(lay.th0, lay.n_bus * T);
  return d;
}

inline std::vector<double> flatten_dispatch(const OpfLayout& lay,
                                            const DispatchSolution& d) {
  const index_t T = lay.periods;
  if (d.periods != T ||
      static_cast<index_t>(d.pg.size()) != lay.n_gen * T ||
      static_cast<index_t>(d.qg.size()) != lay.n_gen * T ||
      static_cast<index_t>(d.p.size()) != lay.n_line * T ||
      static_cast<index_t>(d.q.size()) != lay.n_line * T ||
      static_cast<index_t>(d.v.size()) != lay.n_bus * T ||
      static_cast<index_t>(d.th.size()) != lay.n_bus * T)
    throw Error("flatten_dispatch: shape mismatch");
  std::vector<double> x(static_cast<std::size_t>(lay.n_vars));
  auto put = [&](index_t offset, const std::vector<double>& src) {
    std::copy(src.begin(), src.end(), x.begin() + offset);
  };
  put(lay.pg0, d.pg);
  put(lay.qg0, d.qg);
  put(lay.p0, d.p);
  put(lay.q0, d.q);
  put(lay.v0, d.v);
  put(lay.th0, d.th);
  return x;
}

}  // namespace gridnlp::power
