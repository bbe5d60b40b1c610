#pragma once

#include <span>

#include "gridnlp/common.hpp"

namespace gridnlp::ipm {

// General sparse NLP:
//   min f(x)  s.t.  row_lower <= g(x) <= row_upper,  x_lower <= x <= x_upper
// Jacobian/Hessian structures are fixed coordinate lists (duplicates allowed
// and summed); the Hessian is the lower triangle of
//   obj_weight * f''(x) + sum_i row_weights[i] * g_i''(x).
// Evaluations return false on domain violations / non-finite results.
class NlpProblem {
public:
  virtual ~NlpProblem() = default;

  virtual index_t n_vars() const = 0;
  virtual index_t n_cons() const = 0;
  virtual std::span<const double> x_lower() const = 0;
  virtual std::span<const double> x_upper() const = 0;
  virtual std::span<const double> x_start() const = 0;
  virtual std::span<const double> row_lower() const = 0;
  virtual std::span<const double> row_upper() const = 0;

  virtual std::span<const index_t> jac_rows() const = 0;
  virtual std::span<const index_t> jac_cols() const = 0;
  virtual std::span<const index_t> hess_rows() const = 0;
  virtual std::span<const index_t> hess_cols() const = 0;

  virtual bool eval_f(std::span<const double> x, double& out) = 0;
  virtual bool eval_grad(std::span<const double> x, std::span<double> out) = 0;
  virtual bool eval_g(std::span<const double> x, std::span<double> out) = 0;
  virtual bool eval_jac(std::span<const double> x, std::span<double> out) = 0;
  virtual bool eval_hess(std::span<const double> x,
                         std::span<const double> row_weights, double obj_weight,
                         std::span<double> out) = 0;
};

}  // namespace gridnlp::ipm
