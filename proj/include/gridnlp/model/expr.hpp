#pragma once

#include <cmath>
#include <cstdint>
#include <memory>

#include "gridnlp/common.hpp"

namespace gridnlp::model {

enum class Op : std::uint8_t {
  Const,  // literal baked into the pattern
  Real,   // per-record data field
  Var,    // per-record decision-variable field
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Sin,
  Cos,
  Sqrt,
  Log,
  Exp,
  Pow,  // constant exponent
};

// Immutable expression node; expressions are cheap handles to a shared DAG,
// so a subexpression stored in a local and reused is taped only once.
struct ExprNode {
  Op op;
  std::shared_ptr<const ExprNode> a, b;
  double constant = 0.0;  // Const value or Pow exponent
  index_t field = -1;     // Real/Var field index within the record
};

class Expr {
public:
  Expr() = default;
  Expr(double c)  // implicit: literals mix into expressions
      : node_(std::make_shared<ExprNode>(ExprNode{Op::Const, nullptr, nullptr, c, -1})) {}
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}

  const std::shared_ptr<const ExprNode>& node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

private:
  std::shared_ptr<const ExprNode> node_;
};

inline Expr make_unary(Op op, const Expr& a, double c = 0.0) {
  if (!a.valid()) throw Error("expression: empty operand");
  return Expr(std::make_shared<ExprNode>(ExprNode{op, a.node(), nullptr, c, -1}));
}

inline Expr make_binary(Op op, const Expr& a, const Expr& b) {
  if (!a.valid() || !b.valid()) throw Error("expression: empty operand");
  return Expr(std::make_shared<ExprNode>(ExprNode{op, a.node(), b.node(), 0.0, -1}));
}

// k-th decision-variable field of a record.
inline Expr var(index_t k) {
  if (k < 0) throw Error("var: negative field index");
  return Expr(std::make_shared<ExprNode>(ExprNode{Op::Var, nullptr, nullptr, 0.0, k}));
}

// k-th data (parameter) field of a record.
inline Expr real(index_t k) {
  if (k < 0) throw Error("real: negative field index");
  return Expr(std::make_shared<ExprNode>(ExprNode{Op::Real, nullptr, nullptr, 0.0, k}));
}

inline Expr operator+(const Expr& a, const Expr& b) { return make_binary(Op::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return make_binary(Op::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return make_binary(Op::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return make_binary(Op::Div, a, b); }
inline Expr operator-(const Expr& a) { return make_unary(Op::Neg, a); }
inline Expr operator+(const Expr& a) { return a; }

inline Expr sin(const Expr& a) { return make_unary(Op::Sin, a); }
inline Expr cos(const Expr& a) { return make_unary(Op::Cos, a); }
inline Expr sqrt(const Expr& a) { return make_unary(Op::Sqrt, a); }
inline Expr log(const Expr& a) { return make_unary(Op::Log, a); }
inline Expr exp(const Expr& a) { return make_unary(Op::Exp, a); }
inline Expr pow(const Expr& a, double c) { return make_unary(Op::Pow, a, c); }
inline Expr square(const Expr& a) { return make_unary(Op::Pow, a, 2.0); }

}  // namespace gridnlp::model
