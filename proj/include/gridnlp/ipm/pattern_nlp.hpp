#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/nlp.hpp"
#include "gridnlp/model/pattern_model.hpp"

namespace gridnlp::ipm {

// Exposes a frozen pattern model through the NlpProblem interface.
// The model must outlive the adapter.
class PatternNlp final : public NlpProblem {
public:
  explicit PatternNlp(model::PatternModel& m) : model_(&m) {
    if (!m.frozen()) throw Error("PatternNlp: model must be frozen");
  }

  index_t n_vars() const override { return model_->n_vars(); }
  index_t n_cons() const override { return model_->n_cons(); }
  std::span<const double> x_lower() const override { return model_->x_lower(); }
  std::span<const double> x_upper() const override { return model_->x_upper(); }
  std::span<const double> x_start() const override { return model_->x_start(); }
  std::span<const double> row_lower() const override { return model_->row_lower(); }
  std::span<const double> row_upper() const override { return model_->row_upper(); }

  std::span<const index_t> jac_rows() const override { return model_->jacobian_rows(); }
  std::span<const index_t> jac_cols() const override { return model_->jacobian_cols(); }
  std::span<const index_t> hess_rows() const override { return model_->hessian_rows(); }
  std::span<const index_t> hess_cols() const override { return model_->hessian_cols(); }

  bool eval_f(std::span<const double> x, double& out) override {
    return record(model_->evaluate_objective(x, out));
  }
  bool eval_grad(std::span<const double> x, std::span<double> out) override {
    return record(model_->evaluate_gradient(x, out));
  }
  bool eval_g(std::span<const double> x, std::span<double> out) override {
    return record(model_->evaluate_constraints(x, out));
  }
  bool eval_jac(std::span<const double> x, std::span<double> out) override {
    return record(model_->evaluate_jacobian(x, out));
  }
  bool eval_hess(std::span<const double> x, std::span<const double> row_weights,
                 double obj_weight, std::span<double> out) override {
    return record(model_->evaluate_hessian(x, row_weights, obj_weight, out));
  }

  // Diagnostic for the most recent failed evaluation.
  const std::string& last_failure() const { return last_failure_; }

private:
  bool record(const model::EvalStatus& st) {
    if (!st.ok && st.reason) last_failure_ = st.reason;
    return st.ok;
  }

  model::PatternModel* model_;
  std::string last_failure_;
};

}  // namespace gridnlp::ipm
