#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/iterate.hpp"
#include "gridnlp/sparse/ldlt.hpp"
#include "gridnlp/sparse/matrix.hpp"

namespace gridnlp::ipm {

// Reduced Newton system for the canonical barrier subproblem.  With
//   Sigma_x, Sigma_s  bound condensation diagonals,
//   C = (dc*Sigma_s + (1 + dc*dw) I)^{-1},   D = (Sigma_s + dw I) C,
// the direction solves
//   M dx = -(qx + A^T (C qs + D qy)),   M = W + dw I + Sigma_x + A^T D A,
//   ds = C (A dx + qy - dc*qs),
//   dy = -qs - (Sigma_s + dw I) ds,
// in the plus convention (w <- w + alpha d).  The sparsity pattern of M is
// fixed once (Hessian union A^T A union diagonal); each assembly rescatters
// values.  One LDL^T symbolic analysis is reused across all factorizations.
class CondensedKkt {
public:
  CondensedKkt(index_t n, index_t m, std::span<const index_t> jac_rows,
               std::span<const index_t> jac_cols,
               std::span<const index_t> hess_rows,
               std::span<const index_t> hess_cols,
               sparse::LdltOptions ldlt_opts = {})
      : n_(n), m_(m) {
    // Jacobian rows as CSR (duplicate coordinates merge into one slot).
    sparse::CooPattern jac;
    jac.nrows = m;
    jac.ncols = n;
    jac.rows.assign(jac_rows.begin(), jac_rows.end());
    jac.cols.assign(jac_cols.begin(), jac_cols.end());
    a_ = sparse::compress_to_csr(jac, jac_slots_);
    a_vals_.assign(static_cast<size_t>(a_.nnz()), 0.0);

    // Pattern of M: Hessian entries, A^T A products row by row, diagonal.
    sparse::CooPattern mcoo;
    mcoo.nrows = mcoo.ncols = n;
    const size_t nnz_h = hess_rows.size();
    for (size_t k = 0; k < nnz_h; ++k) {
      const index_t r = std::max(hess_rows[k], hess_cols[k]);
      const index_t c = std::min(hess_rows[k], hess_cols[k]);
      mcoo.rows.push_back(r);
      mcoo.cols.push_back(c);
    }
    size_t pair_count = 0;
    for (index_t r = 0; r < m; ++r) {
      const size_t len = static_cast<size_t>(a_.rowptr[static_cast<size_t>(r) + 1] -
                                             a_.rowptr[static_cast<size_t>(r)]);
      pair_count += len * (len + 1) / 2;
    }
    mcoo.rows.reserve(nnz_h + pair_count + static_cast<size_t>(n));
    mcoo.cols.reserve(nnz_h + pair_count + static_cast<size_t>(n));
    for (index_t r = 0; r < m; ++r) {
      for (index_t ka = a_.rowptr[r]; ka < a_.rowptr[static_cast<size_t>(r) + 1];
           ++ka) {
        for (index_t kb = a_.rowptr[r]; kb <= ka; ++kb) {
          mcoo.rows.push_back(a_.colidx[ka]);  // colidx sorted: ka entry >= kb
          mcoo.cols.push_back(a_.colidx[kb]);
        }
      }
    }
    for (index_t i = 0; i < n; ++i) {
      mcoo.rows.push_back(i);
      mcoo.cols.push_back(i);
    }

    std::vector<index_t> slots;
    mpat_ = sparse::compress_to_csc(mcoo, slots);
    hess_slots_.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(nnz_h));
    pair_slots_.assign(slots.begin() + static_cast<std::ptrdiff_t>(nnz_h),
                       slots.begin() + static_cast<std::ptrdiff_t>(nnz_h + pair_count));
    diag_slots_.assign(slots.end() - n, slots.end());
    mvals_.assign(static_cast<size_t>(mpat_.nnz()), 0.0);

    ldlt_.emplace(mpat_, std::vector<index_t>{}, ldlt_opts);
    cvec_.assign(static_cast<size_t>(m), 0.0);
    dvec_.assign(static_cast<size_t>(m), 0.0);
    sig_dw_.assign(static_cast<size_t>(m), 0.0);
    tm_.assign(static_cast<size_t>(m), 0.0);
    rhs_.assign(static_cast<size_t>(n), 0.0);
  }

  index_t dim() const { return n_; }
  const sparse::CsrPattern& jacobian_csr() const { return a_; }
  std::span<const double> jacobian_values() const { return a_vals_; }
  const sparse::CscPattern& pattern() const { return mpat_; }
  std::span<const double> values() const { return mvals_; }
  index_t factor_nnz() const { return ldlt_->factor_nnz(); }

  void set_jacobian(std::span<const double> jac_vals) {
    sparse::scatter_values(jac_slots_, jac_vals, a_vals_);
  }

  // Rebuilds every value of M for the given condensation data and
  // regularization; retries after an inertia correction must call this again.
  void assemble(std::span<const double> hess_vals,
                std::span<const double> sigma_x,
                std::span<const double> sigma_s, double delta_w,
                double delta_c) {
    delta_w_ = delta_w;
    delta_c_ = delta_c;
    for (index_t i = 0; i < m_; ++i) {
      const double sd = sigma_s[static_cast<size_t>(i)] + delta_w;
      const double c = 1.0 / (1.0 + delta_c * sd);
      cvec_[static_cast<size_t>(i)] = c;
      dvec_[static_cast<size_t>(i)] = sd * c;
      sig_dw_[static_cast<size_t>(i)] = sd;
    }
    std::fill(mvals_.begin(), mvals_.end(), 0.0);
    for (size_t k = 0; k < hess_slots_.size(); ++k)
      mvals_[static_cast<size_t>(hess_slots_[k])] += hess_vals[k];
    size_t p = 0;
    for (index_t r = 0; r < m_; ++r) {
      const double w = dvec_[static_cast<size_t>(r)];
      for (index_t ka = a_.rowptr[r]; ka < a_.rowptr[static_cast<size_t>(r) + 1];
           ++ka) {
        const double va = w * a_vals_[static_cast<size_t>(ka)];
        for (index_t kb = a_.rowptr[r]; kb <= ka; ++kb, ++p)
          mvals_[static_cast<size_t>(pair_slots_[p])] +=
              va * a_vals_[static_cast<size_t>(kb)];
      }
    }
    for (index_t i = 0; i < n_; ++i)
      mvals_[static_cast<size_t>(diag_slots_[static_cast<size_t>(i)])] +=
          delta_w + sigma_x[static_cast<size_t>(i)];
  }

  // Numeric factorization; the step is usable only when the inertia is
  // (n, 0, 0) with no floored pivots.
  bool factorize() {
    ldlt_->factorize(mvals_);
    const sparse::Inertia& in = ldlt_->inertia();
    return in.positive == n_ && in.negative == 0 && in.zero == 0;
  }
  const sparse::Inertia& inertia() const { return ldlt_->inertia(); }
  index_t floored_pivots() const { return ldlt_->floored_pivots(); }

  // Solves for (dx, ds, dy) given the reduced residuals; assemble() and
  // factorize() must have succeeded.  Returns the refined residual norm of
  // the condensed solve.
  double solve(std::span<const double> qx, std::span<const double> qs,
               std::span<const double> qy, Direction& d, int refine_passes) {
    for (index_t i = 0; i < m_; ++i)
      tm_[static_cast<size_t>(i)] = cvec_[static_cast<size_t>(i)] * qs[static_cast<size_t>(i)] +
                                    dvec_[static_cast<size_t>(i)] * qy[static_cast<size_t>(i)];
    sparse::csr_matvec_transpose(a_, a_vals_, tm_, rhs_);
    for (index_t i = 0; i < n_; ++i)
      rhs_[static_cast<size_t>(i)] = -(qx[static_cast<size_t>(i)] + rhs_[static_cast<size_t>(i)]);

    d.dx.assign(static_cast<size_t>(n_), 0.0);
    d.ds.assign(static_cast<size_t>(m_), 0.0);
    d.dy.assign(static_cast<size_t>(m_), 0.0);
    ldlt_->solve(rhs_, d.dx);
    const double resid = ldlt_->refine(mvals_, rhs_, d.dx, refine_passes);

    sparse::csr_matvec(a_, a_vals_, d.dx, tm_);  // tm = A dx
    for (index_t i = 0; i < m_; ++i) {
      const size_t u = static_cast<size_t>(i);
      d.ds[u] = cvec_[u] * (tm_[u] + qy[u] - delta_c_ * qs[u]);
      d.dy[u] = -qs[u] - sig_dw_[u] * d.ds[u];
    }
    return resid;
  }

private:
  index_t n_, m_;
  sparse::CsrPattern a_;
  std::vector<index_t> jac_slots_;
  std::vector<double> a_vals_;
  sparse::CscPattern mpat_;
  std::vector<index_t> hess_slots_, pair_slots_, diag_slots_;
  std::vector<double> mvals_;
  std::optional<sparse::LdltSolver> ldlt_;
  std::vector<double> cvec_, dvec_, sig_dw_, tm_, rhs_;
  double delta_w_ = 0.0, delta_c_ = 0.0;
};

// Bound-multiplier recovery from a solved (dx, ds):
//   dzl = -(pzl + Z dw) / gap,   dzu = (-pzu + Z dw) / gap.
inline void recover_bound_steps(const Iterate& it, const Residuals& r,
                                std::span<const double> xl,
                                std::span<const double> xu,
                                std::span<const double> sl,
                                std::span<const double> su, Direction& d) {
  const size_t n = it.x.size();
  const size_t m = it.s.size();
  d.dzlx.assign(n, 0.0);
  d.dzux.assign(n, 0.0);
  d.dzls.assign(m, 0.0);
  d.dzus.assign(m, 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (has_lower(xl[i]))
      d.dzlx[i] = -(r.pzlx[i] + it.zlx[i] * d.dx[i]) / (it.x[i] - xl[i]);
    if (has_upper(xu[i]))
      d.dzux[i] = (-r.pzux[i] + it.zux[i] * d.dx[i]) / (xu[i] - it.x[i]);
  }
  for (size_t i = 0; i < m; ++i) {
    if (has_lower(sl[i]))
      d.dzls[i] = -(r.pzls[i] + it.zls[i] * d.ds[i]) / (it.s[i] - sl[i]);
    if (has_upper(su[i]))
      d.dzus[i] = (-r.pzus[i] + it.zus[i] * d.ds[i]) / (su[i] - it.s[i]);
  }
}

}  // namespace gridnlp::ipm
