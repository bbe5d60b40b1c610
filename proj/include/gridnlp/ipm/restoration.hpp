#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/lifted.hpp"
#include "gridnlp/ipm/nlp.hpp"

namespace gridnlp::ipm {

// Feasibility-restoration NLP for a canonical problem: over w = (x, s) and
// elastic splits p, n >= 0,
//   min  1^T (p + n) + zeta/2 * || D_R (w - w_R) ||^2
//   s.t. g(x) - s - p + n = 0
// with the original bounds on x and s.  D_R = diag(1/max(1, |w_R|)) keeps the
// proximal term scale-free; zeta ~ sqrt(mu) at the point that failed.  Any
// feasible point of the original constraints is a global minimizer with
// p = n = 0, so driving this problem down restores feasibility if possible.
class RestorationNlp final : public NlpProblem {
public:
  RestorationNlp(LiftedProblem& base, std::span<const double> x_ref,
                 std::span<const double> s_ref, double zeta)
      : base_(&base), zeta_(zeta) {
    n_ = base.n();
    m_ = base.m();
    nv_ = n_ + 3 * m_;
    x_ref_.assign(x_ref.begin(), x_ref.end());
    s_ref_.assign(s_ref.begin(), s_ref.end());
    wx_.resize(static_cast<size_t>(n_));
    ws_.resize(static_cast<size_t>(m_));
    for (index_t i = 0; i < n_; ++i)
      wx_[static_cast<size_t>(i)] =
          1.0 / std::max(1.0, std::abs(x_ref_[static_cast<size_t>(i)]));
    for (index_t i = 0; i < m_; ++i)
      ws_[static_cast<size_t>(i)] =
          1.0 / std::max(1.0, std::abs(s_ref_[static_cast<size_t>(i)]));

    xl_.assign(static_cast<size_t>(nv_), 0.0);
    xu_.assign(static_cast<size_t>(nv_), kInf);
    xs_.assign(static_cast<size_t>(nv_), 0.0);
    auto bxl = base.x_lower();
    auto bxu = base.x_upper();
    for (index_t i = 0; i < n_; ++i) {
      xl_[static_cast<size_t>(i)] = bxl[static_cast<size_t>(i)];
      xu_[static_cast<size_t>(i)] = bxu[static_cast<size_t>(i)];
      xs_[static_cast<size_t>(i)] = x_ref_[static_cast<size_t>(i)];
    }
    auto bsl = base.s_lower();
    auto bsu = base.s_upper();
    for (index_t i = 0; i < m_; ++i) {
      xl_[static_cast<size_t>(n_ + i)] = bsl[static_cast<size_t>(i)];
      xu_[static_cast<size_t>(n_ + i)] = bsu[static_cast<size_t>(i)];
      xs_[static_cast<size_t>(n_ + i)] = s_ref_[static_cast<size_t>(i)];
    }
    // Elastic starts absorb the current residual so the constraints hold.
    g_scratch_.resize(static_cast<size_t>(m_));
    if (base.eval_g(x_ref_, g_scratch_)) {
      for (index_t i = 0; i < m_; ++i) {
        const double r =
            g_scratch_[static_cast<size_t>(i)] - s_ref_[static_cast<size_t>(i)];
        xs_[static_cast<size_t>(n_ + m_ + i)] = std::max(r, 0.0);
        xs_[static_cast<size_t>(n_ + 2 * m_ + i)] = std::max(-r, 0.0);
      }
    }
    rl_.assign(static_cast<size_t>(m_), 0.0);
    ru_.assign(static_cast<size_t>(m_), 0.0);

    auto bjr = base.jac_rows();
    auto bjc = base.jac_cols();
    jr_.assign(bjr.begin(), bjr.end());
    jc_.assign(bjc.begin(), bjc.end());
    for (index_t i = 0; i < m_; ++i) {  // -s, -p, +n columns
      jr_.push_back(i);
      jc_.push_back(n_ + i);
      jr_.push_back(i);
      jc_.push_back(n_ + m_ + i);
      jr_.push_back(i);
      jc_.push_back(n_ + 2 * m_ + i);
    }
    auto bhr = base.hess_rows();
    auto bhc = base.hess_cols();
    hr_.assign(bhr.begin(), bhr.end());
    hc_.assign(bhc.begin(), bhc.end());
    for (index_t i = 0; i < n_ + m_; ++i) {  // proximal diagonal over (x, s)
      hr_.push_back(i);
      hc_.push_back(i);
    }
    jac_scratch_.resize(bjr.size());
    hess_scratch_.resize(bhr.size());
  }

  index_t n_vars() const override { return nv_; }
  index_t n_cons() const override { return m_; }
  std::span<const double> x_lower() const override { return xl_; }
  std::span<const double> x_upper() const override { return xu_; }
  std::span<const double> x_start() const override { return xs_; }
  std::span<const double> row_lower() const override { return rl_; }
  std::span<const double> row_upper() const override { return ru_; }
  std::span<const index_t> jac_rows() const override { return jr_; }
  std::span<const index_t> jac_cols() const override { return jc_; }
  std::span<const index_t> hess_rows() const override { return hr_; }
  std::span<const index_t> hess_cols() const override { return hc_; }

  bool eval_f(std::span<const double> x, double& out) override {
    double acc = 0.0;
    for (index_t i = 0; i < m_; ++i)
      acc += x[static_cast<size_t>(n_ + m_ + i)] +
             x[static_cast<size_t>(n_ + 2 * m_ + i)];
    for (index_t i = 0; i < n_; ++i) {
      const double dv = wx_[static_cast<size_t>(i)] *
                        (x[static_cast<size_t>(i)] - x_ref_[static_cast<size_t>(i)]);
      acc += 0.5 * zeta_ * dv * dv;
    }
    for (index_t i = 0; i < m_; ++i) {
      const double dv = ws_[static_cast<size_t>(i)] *
                        (x[static_cast<size_t>(n_ + i)] - s_ref_[static_cast<size_t>(i)]);
      acc += 0.5 * zeta_ * dv * dv;
    }
    out = acc;
    return std::isfinite(acc);
  }

  bool eval_grad(std::span<const double> x, std::span<double> out) override {
    for (index_t i = 0; i < n_; ++i) {
      const double w = wx_[static_cast<size_t>(i)];
      out[static_cast<size_t>(i)] =
          zeta_ * w * w * (x[static_cast<size_t>(i)] - x_ref_[static_cast<size_t>(i)]);
    }
    for (index_t i = 0; i < m_; ++i) {
      const double w = ws_[static_cast<size_t>(i)];
      out[static_cast<size_t>(n_ + i)] =
          zeta_ * w * w *
          (x[static_cast<size_t>(n_ + i)] - s_ref_[static_cast<size_t>(i)]);
    }
    for (index_t i = 0; i < 2 * m_; ++i)
      out[static_cast<size_t>(n_ + m_ + i)] = 1.0;
    return true;
  }

  bool eval_g(std::span<const double> x, std::span<double> out) override {
    if (!base_->eval_g(x.subspan(0, static_cast<size_t>(n_)), out)) return false;
    for (index_t i = 0; i < m_; ++i)
      out[static_cast<size_t>(i)] += -x[static_cast<size_t>(n_ + i)] -
                                     x[static_cast<size_t>(n_ + m_ + i)] +
                                     x[static_cast<size_t>(n_ + 2 * m_ + i)];
    return true;
  }

  bool eval_jac(std::span<const double> x, std::span<double> out) override {
    if (!base_->eval_jac(x.subspan(0, static_cast<size_t>(n_)), jac_scratch_))
      return false;
    std::copy(jac_scratch_.begin(), jac_scratch_.end(), out.begin());
    size_t p = jac_scratch_.size();
    for (index_t i = 0; i < m_; ++i) {
      out[p++] = -1.0;  // slack column
      out[p++] = -1.0;  // p column
      out[p++] = 1.0;   // n column
    }
    return true;
  }

  bool eval_hess(std::span<const double> x, std::span<const double> row_weights,
                 double obj_weight, std::span<double> out) override {
    if (!base_->eval_hess(x.subspan(0, static_cast<size_t>(n_)), row_weights,
                          0.0, hess_scratch_))
      return false;
    std::copy(hess_scratch_.begin(), hess_scratch_.end(), out.begin());
    size_t p = hess_scratch_.size();
    for (index_t i = 0; i < n_; ++i) {
      const double w = wx_[static_cast<size_t>(i)];
      out[p++] = obj_weight * zeta_ * w * w;
    }
    for (index_t i = 0; i < m_; ++i) {
      const double w = ws_[static_cast<size_t>(i)];
      out[p++] = obj_weight * zeta_ * w * w;
    }
    return true;
  }

private:
  LiftedProblem* base_;
  double zeta_;
  index_t n_ = 0, m_ = 0, nv_ = 0;
  std::vector<double> x_ref_, s_ref_, wx_, ws_;
  std::vector<double> xl_, xu_, xs_, rl_, ru_;
  std::vector<index_t> jr_, jc_, hr_, hc_;
  std::vector<double> g_scratch_, jac_scratch_, hess_scratch_;
};

}  // namespace gridnlp::ipm
