#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "gridnlp/model/pattern_model.hpp"
#include "support/fd_oracle.hpp"

using namespace gridnlp;
using namespace gridnlp::model;

namespace {

// Quadratic-cost model: one variable block of 6 entries, objective pattern
// c2*p^2 + c1*p + c0 applied to each entry.
PatternModel make_quadratic_model(std::vector<double>* c2_out = nullptr) {
  PatternModel pm;
  VarBlock pg = pm.add_variable_block("pg", {6}, 0.0, 10.0, 1.0);
  PatternData data;
  data.n_records = 6;
  data.n_var_fields = 1;
  data.n_real_fields = 3;
  for (index_t g = 0; g < 6; ++g) {
    const double c2 = 0.5 + 0.1 * g, c1 = 1.0 + g, c0 = 2.0;
    data.reals.insert(data.reals.end(), {c2, c1, c0});
    data.vars.push_back(pm.flat_index(pg, g));
    if (c2_out) c2_out->push_back(c2);
  }
  Expr p = var(0);
  Expr cost = real(0) * p * p + real(1) * p + real(2);
  pm.add_objective_pattern("cost", cost, std::move(data));
  pm.freeze();
  return pm;
}

}  // namespace

TEST_CASE("quadratic objective pattern: values, slots, derivatives") {
  std::vector<double> c2s;
  PatternModel pm = make_quadratic_model(&c2s);
  REQUIRE(pm.n_vars() == 6);
  REQUIRE(pm.gradient_slots() == 6);  // one slot per record per field
  REQUIRE(pm.hess_nnz() == 6);        // k=1 => one lower-triangle slot each

  std::vector<double> x{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  double f = 0.0;
  REQUIRE(pm.evaluate_objective(x, f));
  double expected = 0.0;
  for (int g = 0; g < 6; ++g)
    expected += (0.5 + 0.1 * g) * x[g] * x[g] + (1.0 + g) * x[g] + 2.0;
  REQUIRE_THAT(f, Catch::Matchers::WithinRel(expected, 1e-15));

  std::vector<double> grad(6);
  REQUIRE(pm.evaluate_gradient(x, grad));
  auto feval = [&](std::span<const double> xx) {
    double v = 0.0;
    REQUIRE(pm.evaluate_objective(xx, v));
    return v;
  };
  std::vector<double> gref = fd_gradient(feval, x);
  for (int i = 0; i < 6; ++i)
    REQUIRE_THAT(grad[i], Catch::Matchers::WithinAbs(gref[i], 1e-6));

  std::vector<double> hvals(pm.hess_nnz());
  REQUIRE(pm.evaluate_hessian(x, std::vector<double>{}, 1.0, hvals));
  auto hr = pm.hessian_rows();
  auto hc = pm.hessian_cols();
  for (int s = 0; s < 6; ++s) {
    REQUIRE(hr[s] == s);
    REQUIRE(hc[s] == s);
    REQUIRE_THAT(hvals[s], Catch::Matchers::WithinRel(2.0 * c2s[s], 1e-15));
  }
}

TEST_CASE("two-dimensional blocks index entity-major") {
  PatternModel pm;
  VarBlock a = pm.add_variable_block("a", {3, 5}, 0.0, 1.0, 0.5);
  VarBlock b = pm.add_variable_block("b", {2}, -1.0, 1.0, 0.0);
  REQUIRE(pm.n_vars() == 17);
  REQUIRE(pm.block_offset(a) == 0);
  REQUIRE(pm.block_offset(b) == 15);
  REQUIRE(pm.flat_index(a, 0, 0) == 0);
  REQUIRE(pm.flat_index(a, 1, 0) == 5);   // entity-major: period is fastest
  REQUIRE(pm.flat_index(a, 1, 3) == 8);
  REQUIRE(pm.flat_index(b, 1) == 16);
  REQUIRE_THROWS_AS(pm.flat_index(a, 3, 0), Error);
  REQUIRE_THROWS_AS(pm.flat_index(b, 0, 0), Error);
  REQUIRE_THROWS_AS(pm.add_variable_block("a", {1}, 0, 1, 0), Error);
}

TEST_CASE("five-variable coupling pattern gets five Jacobian entries per record") {
  PatternModel pm;
  VarBlock flow = pm.add_variable_block("flow", {4}, -kInf, kInf, 0.1);
  VarBlock vm = pm.add_variable_block("vm", {3}, 0.9, 1.1, 1.0);
  VarBlock th = pm.add_variable_block("th", {3}, -kInf, kInf, 0.0);
  RowBlock rows = pm.add_constraint_block("flowdef", 4, 0.0, 0.0);

  // p - vm*vn*(G*cos(tm - tn) + B*sin(tm - tn)) over 4 line records on a
  // 3-bus triangle plus one parallel line.
  const int from[4] = {0, 1, 2, 0};
  const int to[4] = {1, 2, 0, 1};
  PatternData data;
  data.n_records = 4;
  data.n_var_fields = 5;
  data.n_real_fields = 2;
  for (int l = 0; l < 4; ++l) {
    data.vars.insert(data.vars.end(),
                     {pm.flat_index(flow, l), pm.flat_index(vm, from[l]),
                      pm.flat_index(vm, to[l]), pm.flat_index(th, from[l]),
                      pm.flat_index(th, to[l])});
    data.reals.insert(data.reals.end(), {1.0 + 0.2 * l, -4.0 - 0.5 * l});
    data.rows.push_back(l);
  }
  Expr p = var(0), vmf = var(1), vmt = var(2), dt = var(3) - var(4);
  Expr g = real(0), b = real(1);
  pm.add_constraint_pattern("flowdef", rows, p - vmf * vmt * (g * cos(dt) + b * sin(dt)),
                            std::move(data));
  pm.freeze();

  REQUIRE(pm.n_cons() == 4);
  REQUIRE(pm.jac_nnz() == 20);  // 4 records x 5 coupled variables
  auto jr = pm.jacobian_rows();
  for (int s = 0; s < 20; ++s) REQUIRE(jr[s] == s / 5);

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> unif(-0.3, 0.3);
  std::vector<double> x(pm.n_vars());
  for (int i = 0; i < 4; ++i) x[i] = unif(rng);
  for (int i = 4; i < 7; ++i) x[i] = 1.0 + 0.05 * unif(rng);
  for (int i = 7; i < 10; ++i) x[i] = unif(rng);

  auto geval = [&](std::span<const double> xx) {
    std::vector<double> out(pm.n_cons());
    REQUIRE(pm.evaluate_constraints(xx, out));
    return out;
  };
  std::vector<double> jref = fd_jacobian(geval, x, 4);
  std::vector<double> jvals(pm.jac_nnz());
  REQUIRE(pm.evaluate_jacobian(x, jvals));
  std::vector<double> jdense(4 * pm.n_vars(), 0.0);
  auto jc = pm.jacobian_cols();
  for (int s = 0; s < pm.jac_nnz(); ++s)
    jdense[jr[s] * pm.n_vars() + jc[s]] += jvals[s];
  for (size_t i = 0; i < jref.size(); ++i)
    REQUIRE_THAT(jdense[i], Catch::Matchers::WithinAbs(jref[i], 1e-7));

  // Weighted constraint Hessian against the finite-difference oracle.
  std::vector<double> w{0.7, -1.3, 0.4, 2.0};
  std::vector<double> hvals(pm.hess_nnz());
  REQUIRE(pm.evaluate_hessian(x, w, 0.0, hvals));
  auto weighted = [&](std::span<const double> xx) {
    std::vector<double> out(pm.n_cons());
    REQUIRE(pm.evaluate_constraints(xx, out));
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) acc += w[i] * out[i];
    return acc;
  };
  std::vector<double> href = fd_hessian(weighted, x);
  std::vector<double> hdense(pm.n_vars() * pm.n_vars(), 0.0);
  auto hr = pm.hessian_rows();
  auto hc = pm.hessian_cols();
  for (int s = 0; s < pm.hess_nnz(); ++s) {
    hdense[hr[s] * pm.n_vars() + hc[s]] += hvals[s];
    if (hr[s] != hc[s]) hdense[hc[s] * pm.n_vars() + hr[s]] += hvals[s];
  }
  for (index_t i = 0; i < pm.n_vars(); ++i)
    for (index_t j = 0; j < pm.n_vars(); ++j)
      REQUIRE_THAT(hdense[i * pm.n_vars() + j],
                   Catch::Matchers::WithinAbs(href[i * pm.n_vars() + j], 2e-5));
}

TEST_CASE("records touching one row accumulate additively") {
  PatternModel pm;
  VarBlock xb = pm.add_variable_block("x", {3}, -kInf, kInf, 0.0);
  RowBlock rows = pm.add_constraint_block("sum", 1, 0.0, 0.0);
  PatternData data;
  data.n_records = 3;
  data.n_var_fields = 1;
  data.n_real_fields = 1;
  for (int i = 0; i < 3; ++i) {
    data.vars.push_back(pm.flat_index(xb, i));
    data.reals.push_back(1.0 + i);
    data.rows.push_back(0);
  }
  pm.add_constraint_pattern("terms", rows, real(0) * var(0), std::move(data));
  pm.freeze();
  std::vector<double> x{2.0, 3.0, 4.0}, g(1);
  REQUIRE(pm.evaluate_constraints(x, g));
  REQUIRE_THAT(g[0], Catch::Matchers::WithinRel(1.0 * 2 + 2.0 * 3 + 3.0 * 4, 1e-15));
}

TEST_CASE("repeated variable across fields doubles the shared Hessian slot") {
  PatternModel pm;
  VarBlock xb = pm.add_variable_block("x", {1}, -kInf, kInf, 0.0);
  PatternData data;
  data.n_records = 1;
  data.n_var_fields = 2;
  data.n_real_fields = 0;
  data.vars = {pm.flat_index(xb, 0), pm.flat_index(xb, 0)};
  pm.add_objective_pattern("sq", var(0) * var(1), std::move(data));
  pm.freeze();
  // f(v) = v*v through two fields; d2f/dv2 = 2.
  std::vector<double> x{1.7}, hvals(pm.hess_nnz());
  REQUIRE(pm.evaluate_hessian(x, std::vector<double>{}, 1.0, hvals));
  double dvv = 0.0;
  for (int s = 0; s < pm.hess_nnz(); ++s) dvv += hvals[s];
  REQUIRE_THAT(dvv, Catch::Matchers::WithinAbs(2.0, 1e-14));
}

TEST_CASE("evaluation failures name the pattern and record") {
  PatternModel pm;
  pm.add_variable_block("x", {3}, -kInf, kInf, 1.0);
  RowBlock rows = pm.add_constraint_block("r", 3, 0.0, 0.0);
  PatternData data;
  data.n_records = 3;
  data.n_var_fields = 1;
  data.n_real_fields = 0;
  data.vars = {0, 1, 2};
  data.rows = {0, 1, 2};
  pm.add_constraint_pattern("recip", rows, Expr(1.0) / var(0), std::move(data));
  pm.freeze();

  std::vector<double> g(3);
  EvalStatus ok = pm.evaluate_constraints(std::vector<double>{1.0, 2.0, 4.0}, g);
  REQUIRE(ok);
  EvalStatus bad = pm.evaluate_constraints(std::vector<double>{1.0, 0.0, 4.0}, g);
  REQUIRE_FALSE(bad.ok);
  REQUIRE(bad.pattern == 0);
  REQUIRE(bad.record == 1);
  REQUIRE(pm.pattern_name(bad.pattern) == "recip");
}

TEST_CASE("domain guards reject sqrt, log, pow and overflow cases") {
  auto one_record_model = [](const Expr& e) {
    PatternModel pm;
    pm.add_variable_block("x", {1}, -kInf, kInf, 0.0);
    PatternData data;
    data.n_records = 1;
    data.n_var_fields = 1;
    data.n_real_fields = 0;
    data.vars = {0};
    pm.add_objective_pattern("f", e, std::move(data));
    pm.freeze();
    return pm;
  };
  double out = 0.0;

  PatternModel sq = one_record_model(sqrt(var(0)));
  REQUIRE(sq.evaluate_objective(std::vector<double>{4.0}, out));
  REQUIRE(out == 2.0);
  REQUIRE_FALSE(sq.evaluate_objective(std::vector<double>{-4.0}, out).ok);
  REQUIRE_FALSE(sq.evaluate_objective(std::vector<double>{0.0}, out).ok);

  PatternModel lg = one_record_model(log(var(0)));
  REQUIRE_FALSE(lg.evaluate_objective(std::vector<double>{0.0}, out).ok);

  PatternModel pw = one_record_model(pow(var(0), 0.5));
  REQUIRE_FALSE(pw.evaluate_objective(std::vector<double>{-1.0}, out).ok);

  PatternModel pwneg = one_record_model(pow(var(0), -2.0));
  REQUIRE(pwneg.evaluate_objective(std::vector<double>{-2.0}, out));
  REQUIRE_THAT(out, Catch::Matchers::WithinRel(0.25, 1e-15));
  REQUIRE_FALSE(pwneg.evaluate_objective(std::vector<double>{0.0}, out).ok);

  PatternModel ex = one_record_model(exp(var(0)));
  REQUIRE_FALSE(ex.evaluate_objective(std::vector<double>{1e4}, out).ok);
}

TEST_CASE("freeze discipline") {
  PatternModel pm;
  pm.add_variable_block("x", {2}, 0.0, 1.0, 0.5);
  double out;
  REQUIRE_THROWS_AS(pm.evaluate_objective(std::vector<double>{0.1, 0.2}, out), Error);
  REQUIRE_THROWS_AS(pm.jac_nnz(), Error);
  pm.freeze();
  REQUIRE_THROWS_AS(pm.add_variable_block("y", {1}, 0, 1, 0), Error);
  REQUIRE_THROWS_AS(pm.freeze(), Error);
  REQUIRE_THROWS_AS(pm.evaluate_objective(std::vector<double>{0.1}, out), Error);
  REQUIRE(pm.evaluate_objective(std::vector<double>{0.1, 0.2}, out));
  REQUIRE(out == 0.0);  // no objective patterns
}

TEST_CASE("pattern data validation catches mismatches") {
  PatternModel pm;
  pm.add_variable_block("x", {2}, 0.0, 1.0, 0.5);
  RowBlock rows = pm.add_constraint_block("r", 2, 0.0, 1.0);
  PatternData bad_var;
  bad_var.n_records = 1;
  bad_var.n_var_fields = 1;
  bad_var.n_real_fields = 0;
  bad_var.vars = {7};  // out of range
  bad_var.rows = {0};
  REQUIRE_THROWS_AS(pm.add_constraint_pattern("p", rows, var(0), bad_var), Error);

  PatternData bad_row = bad_var;
  bad_row.vars = {0};
  bad_row.rows = {5};  // outside the block
  REQUIRE_THROWS_AS(pm.add_constraint_pattern("p", rows, var(0), bad_row), Error);

  PatternData undeclared = bad_var;
  undeclared.vars = {0};
  undeclared.rows = {0};
  REQUIRE_THROWS_AS(pm.add_constraint_pattern("p", rows, var(1), undeclared), Error);
}

TEST_CASE("multi-threaded evaluation is bitwise identical to single-threaded") {
  // Mixed trig/rational model large enough to split across threads.
  PatternModel pm;
  const index_t n = 40;
  pm.add_variable_block("x", {n}, -kInf, kInf, 0.3);
  RowBlock rows = pm.add_constraint_block("rows", 10, 0.0, 0.0);

  PatternData obj;
  obj.n_records = n - 1;
  obj.n_var_fields = 2;
  obj.n_real_fields = 1;
  for (index_t i = 0; i + 1 < n; ++i) {
    obj.vars.insert(obj.vars.end(), {i, i + 1});
    obj.reals.push_back(0.1 + 0.01 * i);
  }
  pm.add_objective_pattern(
      "obj", real(0) * sin(var(0) * var(1)) + var(0) * var(0), std::move(obj));

  PatternData con;
  con.n_records = 30;
  con.n_var_fields = 2;
  con.n_real_fields = 1;
  for (index_t r = 0; r < 30; ++r) {
    con.vars.insert(con.vars.end(), {r, (r * 7 + 3) % n});
    con.reals.push_back(1.0 + 0.1 * r);
    con.rows.push_back(r % 10);
  }
  pm.add_constraint_pattern("con", rows,
                            cos(var(0)) * var(1) + real(0) * var(0) * var(1),
                            std::move(con));
  pm.freeze();

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = unif(rng);
  std::vector<double> w(10);
  for (auto& v : w) v = unif(rng);

  auto snapshot = [&]() {
    struct Out {
      double f;
      std::vector<double> g, grad, jac, hess;
    } o;
    o.g.resize(pm.n_cons());
    o.grad.resize(pm.n_vars());
    o.jac.resize(pm.jac_nnz());
    o.hess.resize(pm.hess_nnz());
    REQUIRE(pm.evaluate_objective(x, o.f));
    REQUIRE(pm.evaluate_constraints(x, o.g));
    REQUIRE(pm.evaluate_gradient(x, o.grad));
    REQUIRE(pm.evaluate_jacobian(x, o.jac));
    REQUIRE(pm.evaluate_hessian(x, w, 0.7, o.hess));
    return o;
  };

  pm.set_threads(1);
  auto s1 = snapshot();
  pm.set_threads(4);
  auto s4 = snapshot();
  REQUIRE(s1.f == s4.f);
  REQUIRE(s1.g == s4.g);
  REQUIRE(s1.grad == s4.grad);
  REQUIRE(s1.jac == s4.jac);
  REQUIRE(s1.hess == s4.hess);
}

TEST_CASE("shared subexpressions tape once and differentiate correctly") {
  PatternModel pm;
  pm.add_variable_block("x", {2}, -kInf, kInf, 0.4);
  PatternData data;
  data.n_records = 1;
  data.n_var_fields = 2;
  data.n_real_fields = 0;
  data.vars = {0, 1};
  Expr s = var(0) * var(1);  // reused twice: taped once
  pm.add_objective_pattern("f", s * s + sin(s), std::move(data));
  pm.freeze();

  std::vector<double> x{0.8, -0.6};
  auto feval = [&](std::span<const double> xx) {
    double v = 0.0;
    REQUIRE(pm.evaluate_objective(xx, v));
    return v;
  };
  std::vector<double> grad(2), gref = fd_gradient(feval, x);
  REQUIRE(pm.evaluate_gradient(x, grad));
  for (int i = 0; i < 2; ++i)
    REQUIRE_THAT(grad[i], Catch::Matchers::WithinAbs(gref[i], 1e-8));

  std::vector<double> hvals(pm.hess_nnz()), href = fd_hessian(feval, x);
  REQUIRE(pm.evaluate_hessian(x, std::vector<double>{}, 1.0, hvals));
  std::vector<double> hdense(4, 0.0);
  auto hr = pm.hessian_rows();
  auto hc = pm.hessian_cols();
  for (int s2 = 0; s2 < pm.hess_nnz(); ++s2) {
    hdense[hr[s2] * 2 + hc[s2]] += hvals[s2];
    if (hr[s2] != hc[s2]) hdense[hc[s2] * 2 + hr[s2]] += hvals[s2];
  }
  for (int i = 0; i < 4; ++i)
    REQUIRE_THAT(hdense[i], Catch::Matchers::WithinAbs(href[i], 2e-5));
}
