#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "gridnlp/model/expr.hpp"

namespace gridnlp::model {

// First-order dual number; running the reverse sweep on duals yields
// Hessian columns (forward-over-reverse).
struct Dual {
  double v = 0.0;
  double d = 0.0;
  Dual() = default;
  Dual(double value) : v(value) {}
  Dual(double value, double dot) : v(value), d(dot) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator/(Dual a, Dual b) {
  const double q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}
inline Dual& operator+=(Dual& a, Dual b) { a = a + b; return a; }
inline Dual& operator-=(Dual& a, Dual b) { a = a - b; return a; }
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, 0.5 * a.d / s};
}
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual pow(Dual a, double c) {
  return {std::pow(a.v, c), c * std::pow(a.v, c - 1.0) * a.d};
}

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }
inline bool is_zero(double x) { return x == 0.0; }
inline bool is_zero(Dual x) { return x.v == 0.0 && x.d == 0.0; }

// Typed math dispatch for the sweeps (plain doubles or duals); sidesteps the
// implicit double -> Expr/Dual conversions that would make unqualified calls
// ambiguous inside this namespace.
inline double t_sin(double x) { return std::sin(x); }
inline double t_cos(double x) { return std::cos(x); }
inline double t_sqrt(double x) { return std::sqrt(x); }
inline double t_log(double x) { return std::log(x); }
inline double t_exp(double x) { return std::exp(x); }
inline double t_pow(double x, double c) { return std::pow(x, c); }
inline Dual t_sin(Dual x) { return sin(x); }
inline Dual t_cos(Dual x) { return cos(x); }
inline Dual t_sqrt(Dual x) { return sqrt(x); }
inline Dual t_log(Dual x) { return log(x); }
inline Dual t_exp(Dual x) { return exp(x); }
inline Dual t_pow(Dual x, double c) { return pow(x, c); }

struct Instr {
  Op op;
  index_t a = -1, b = -1;  // operand tape positions
  index_t field = -1;      // Real/Var field
  double constant = 0.0;   // Const value or Pow exponent
};

// Flattened postorder program for one expression pattern.  Shared DAG nodes
// are emitted once.
struct Tape {
  std::vector<Instr> code;
  index_t n_var_fields = 0;
  index_t n_real_fields = 0;

  static Tape compile(const Expr& root) {
    if (!root.valid()) throw Error("Tape::compile: empty expression");
    Tape t;
    std::unordered_map<const ExprNode*, index_t> seen;
    compile_node(root.node().get(), t, seen);
    return t;
  }

private:
  static index_t compile_node(const ExprNode* n, Tape& t,
                              std::unordered_map<const ExprNode*, index_t>& seen) {
    auto it = seen.find(n);
    if (it != seen.end()) return it->second;
    Instr ins;
    ins.op = n->op;
    if (n->a) ins.a = compile_node(n->a.get(), t, seen);
    if (n->b) ins.b = compile_node(n->b.get(), t, seen);
    ins.field = n->field;
    ins.constant = n->constant;
    if (n->op == Op::Var) t.n_var_fields = std::max(t.n_var_fields, n->field + 1);
    if (n->op == Op::Real) t.n_real_fields = std::max(t.n_real_fields, n->field + 1);
    if (n->op == Op::Pow) {
      // Validate exponent domain requirements lazily at evaluation; reject
      // the one form with no consistent derivative up front.
      if (!std::isfinite(n->constant))
        throw Error("pow: exponent must be finite");
    }
    t.code.push_back(ins);
    const index_t pos = static_cast<index_t>(t.code.size()) - 1;
    seen.emplace(n, pos);
    return pos;
  }
};

// Domain admission for twice-differentiable evaluation at u.
inline bool pow_domain_ok(double u, double c) {
  const bool integral = (c == std::nearbyint(c));
  if (integral) return c >= 0.0 || u != 0.0;
  return u > 0.0;
}

// Forward value sweep.  Returns false on a domain violation; vals must have
// tape length.  Works for plain doubles and for duals (tangent propagation).
template <class T>
bool tape_forward(const Tape& tape, const double* reals, const T* x, T* vals) {
  const Instr* code = tape.code.data();
  const size_t len = tape.code.size();
  for (size_t i = 0; i < len; ++i) {
    const Instr& in = code[i];
    switch (in.op) {
      case Op::Const: vals[i] = T(in.constant); break;
      case Op::Real: vals[i] = T(reals[in.field]); break;
      case Op::Var: vals[i] = x[in.field]; break;
      case Op::Add: vals[i] = vals[in.a] + vals[in.b]; break;
      case Op::Sub: vals[i] = vals[in.a] - vals[in.b]; break;
      case Op::Mul: vals[i] = vals[in.a] * vals[in.b]; break;
      case Op::Div:
        if (value_of(vals[in.b]) == 0.0) return false;
        vals[i] = vals[in.a] / vals[in.b];
        break;
      case Op::Neg: vals[i] = -vals[in.a]; break;
      case Op::Sin: vals[i] = t_sin(vals[in.a]); break;
      case Op::Cos: vals[i] = t_cos(vals[in.a]); break;
      case Op::Sqrt:
        if (!(value_of(vals[in.a]) > 0.0)) return false;
        vals[i] = t_sqrt(vals[in.a]);
        break;
      case Op::Log:
        if (!(value_of(vals[in.a]) > 0.0)) return false;
        vals[i] = t_log(vals[in.a]);
        break;
      case Op::Exp: vals[i] = t_exp(vals[in.a]); break;
      case Op::Pow:
        if (!pow_domain_ok(value_of(vals[in.a]), in.constant)) return false;
        vals[i] = t_pow(vals[in.a], in.constant);
        break;
    }
  }
  return true;
}

// Reverse adjoint sweep seeded at the tape result; adds the (weighted)
// gradient w.r.t. the record's variable fields into xbar.  adj is a
// tape-length scratch buffer.
template <class T>
void tape_reverse(const Tape& tape, const T* vals, T* adj, T seed, T* xbar) {
  const Instr* code = tape.code.data();
  const index_t len = static_cast<index_t>(tape.code.size());
  for (index_t i = 0; i < len; ++i) adj[i] = T(0.0);
  adj[len - 1] = seed;
  for (index_t i = len - 1; i >= 0; --i) {
    const T a = adj[i];
    if (is_zero(a)) continue;
    const Instr& in = code[i];
    switch (in.op) {
      case Op::Const:
      case Op::Real:
        break;
      case Op::Var: xbar[in.field] += a; break;
      case Op::Add:
        adj[in.a] += a;
        adj[in.b] += a;
        break;
      case Op::Sub:
        adj[in.a] += a;
        adj[in.b] -= a;
        break;
      case Op::Mul:
        adj[in.a] += a * vals[in.b];
        adj[in.b] += a * vals[in.a];
        break;
      case Op::Div:
        adj[in.a] += a / vals[in.b];
        adj[in.b] -= a * vals[i] / vals[in.b];
        break;
      case Op::Neg: adj[in.a] -= a; break;
      case Op::Sin: adj[in.a] += a * t_cos(vals[in.a]); break;
      case Op::Cos: adj[in.a] -= a * t_sin(vals[in.a]); break;
      case Op::Sqrt: adj[in.a] += a * T(0.5) / vals[i]; break;
      case Op::Log: adj[in.a] += a / vals[in.a]; break;
      case Op::Exp: adj[in.a] += a * vals[i]; break;
      case Op::Pow:
        adj[in.a] += a * T(in.constant) * t_pow(vals[in.a], in.constant - 1.0);
        break;
    }
  }
}

}  // namespace gridnlp::model
