#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/nlp.hpp"

namespace gridnlp::ipm {

// Rewrites a general NLP into the solver's canonical form
//
//   min f(x)  s.t.  g(x) - s = 0,  xl <= x <= xu,  sl <= s <= su
//
// by (a) eliminating variables pinned by equal bounds, and (b) turning row
// ranges into slack bounds.  Equality rows (row_lower == row_upper) get a
// small relaxation box so the slack keeps a strict interior:
//   width = relax * max(1, |rhs|)   (or just relax with absolute_relaxation)
// Derivative structures are filtered to the free variables once; values are
// gathered from the wrapped problem's full-structure evaluations.
class LiftedProblem {
public:
  LiftedProblem(NlpProblem& nlp, double relax, bool absolute_relaxation = false)
      : nlp_(&nlp) {
    const index_t n_full = nlp.n_vars();
    const index_t m = nlp.n_cons();
    auto xl = nlp.x_lower();
    auto xu = nlp.x_upper();
    auto xs = nlp.x_start();

    free_of_full_.assign(static_cast<size_t>(n_full), -1);
    fixed_value_.assign(static_cast<size_t>(n_full), 0.0);
    for (index_t i = 0; i < n_full; ++i) {
      if (xl[static_cast<size_t>(i)] == xu[static_cast<size_t>(i)]) {
        fixed_value_[static_cast<size_t>(i)] = xl[static_cast<size_t>(i)];
      } else {
        free_of_full_[static_cast<size_t>(i)] = static_cast<index_t>(full_of_free_.size());
        full_of_free_.push_back(i);
      }
    }
    const index_t n = static_cast<index_t>(full_of_free_.size());

    x_lower_.resize(static_cast<size_t>(n));
    x_upper_.resize(static_cast<size_t>(n));
    x_start_.resize(static_cast<size_t>(n));
    for (index_t k = 0; k < n; ++k) {
      const size_t full = static_cast<size_t>(full_of_free_[static_cast<size_t>(k)]);
      x_lower_[static_cast<size_t>(k)] = xl[full];
      x_upper_[static_cast<size_t>(k)] = xu[full];
      x_start_[static_cast<size_t>(k)] = xs[full];
    }

    auto rl = nlp.row_lower();
    auto ru = nlp.row_upper();
    s_lower_.resize(static_cast<size_t>(m));
    s_upper_.resize(static_cast<size_t>(m));
    for (index_t i = 0; i < m; ++i) {
      const double lo = rl[static_cast<size_t>(i)];
      const double hi = ru[static_cast<size_t>(i)];
      if (lo == hi) {
        const double width =
            absolute_relaxation ? relax : relax * std::max(1.0, std::abs(lo));
        s_lower_[static_cast<size_t>(i)] = lo - width;
        s_upper_[static_cast<size_t>(i)] = hi + width;
      } else {
        s_lower_[static_cast<size_t>(i)] = lo;
        s_upper_[static_cast<size_t>(i)] = hi;
      }
    }

    // Filter Jacobian entries to free columns.
    auto jr = nlp.jac_rows();
    auto jc = nlp.jac_cols();
    for (size_t k = 0; k < jr.size(); ++k) {
      const index_t col = free_of_full_[static_cast<size_t>(jc[k])];
      if (col < 0) continue;
      jac_rows_.push_back(jr[k]);
      jac_cols_.push_back(col);
      jac_pick_.push_back(static_cast<index_t>(k));
    }
    // Filter Hessian entries to free row and column.
    auto hr = nlp.hess_rows();
    auto hc = nlp.hess_cols();
    for (size_t k = 0; k < hr.size(); ++k) {
      const index_t r = free_of_full_[static_cast<size_t>(hr[k])];
      const index_t c = free_of_full_[static_cast<size_t>(hc[k])];
      if (r < 0 || c < 0) continue;
      hess_rows_.push_back(r);
      hess_cols_.push_back(c);
      hess_pick_.push_back(static_cast<index_t>(k));
    }

    x_full_.resize(static_cast<size_t>(n_full));
    for (index_t i = 0; i < n_full; ++i)
      x_full_[static_cast<size_t>(i)] = fixed_value_[static_cast<size_t>(i)];
    jac_scratch_.resize(jr.size());
    hess_scratch_.resize(hr.size());
  }

  NlpProblem& inner() { return *nlp_; }
  index_t n() const { return static_cast<index_t>(full_of_free_.size()); }
  index_t m() const { return nlp_->n_cons(); }

  std::span<const double> x_lower() const { return x_lower_; }
  std::span<const double> x_upper() const { return x_upper_; }
  std::span<const double> x_start() const { return x_start_; }
  std::span<const double> s_lower() const { return s_lower_; }
  std::span<const double> s_upper() const { return s_upper_; }

  std::span<const index_t> jac_rows() const { return jac_rows_; }
  std::span<const index_t> jac_cols() const { return jac_cols_; }
  std::span<const index_t> hess_rows() const { return hess_rows_; }
  std::span<const index_t> hess_cols() const { return hess_cols_; }
  index_t jac_nnz() const { return static_cast<index_t>(jac_rows_.size()); }
  index_t hess_nnz() const { return static_cast<index_t>(hess_rows_.size()); }

  // Maps a free-variable vector into the wrapped problem's full space
  // (fixed entries at their pinned values).
  void to_full(std::span<const double> x, std::span<double> out) const {
    for (size_t i = 0; i < fixed_value_.size(); ++i) out[i] = fixed_value_[i];
    for (size_t k = 0; k < full_of_free_.size(); ++k)
      out[static_cast<size_t>(full_of_free_[k])] = x[k];
  }
  std::span<const index_t> free_to_full() const { return full_of_free_; }

  bool eval_f(std::span<const double> x, double& out) {
    stage(x);
    return nlp_->eval_f(x_full_, out);
  }
  bool eval_g(std::span<const double> x, std::span<double> out) {
    stage(x);
    return nlp_->eval_g(x_full_, out);
  }
  bool eval_grad(std::span<const double> x, std::span<double> out) {
    stage(x);
    grad_scratch_.resize(fixed_value_.size());
    if (!nlp_->eval_grad(x_full_, grad_scratch_)) return false;
    for (size_t k = 0; k < full_of_free_.size(); ++k)
      out[k] = grad_scratch_[static_cast<size_t>(full_of_free_[k])];
    return true;
  }
  bool eval_jac(std::span<const double> x, std::span<double> out) {
    stage(x);
    if (!nlp_->eval_jac(x_full_, jac_scratch_)) return false;
    for (size_t k = 0; k < jac_pick_.size(); ++k)
      out[k] = jac_scratch_[static_cast<size_t>(jac_pick_[k])];
    return true;
  }
  bool eval_hess(std::span<const double> x, std::span<const double> row_weights,
                 double obj_weight, std::span<double> out) {
    stage(x);
    if (!nlp_->eval_hess(x_full_, row_weights, obj_weight, hess_scratch_))
      return false;
    for (size_t k = 0; k < hess_pick_.size(); ++k)
      out[k] = hess_scratch_[static_cast<size_t>(hess_pick_[k])];
    return true;
  }

private:
  void stage(std::span<const double> x) {
    for (size_t k = 0; k < full_of_free_.size(); ++k)
      x_full_[static_cast<size_t>(full_of_free_[k])] = x[k];
  }

  NlpProblem* nlp_;
  std::vector<index_t> full_of_free_;   // free index -> full index
  std::vector<index_t> free_of_full_;   // full index -> free index or -1
  std::vector<double> fixed_value_;     // full-length; nonzero only where fixed
  std::vector<double> x_lower_, x_upper_, x_start_;
  std::vector<double> s_lower_, s_upper_;
  std::vector<index_t> jac_rows_, jac_cols_, jac_pick_;
  std::vector<index_t> hess_rows_, hess_cols_, hess_pick_;
  std::vector<double> x_full_, grad_scratch_, jac_scratch_, hess_scratch_;
};

}  // namespace gridnlp::ipm
