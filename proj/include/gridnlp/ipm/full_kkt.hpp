#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/ipm/iterate.hpp"
#include "gridnlp/sparse/dense_ldl.hpp"

namespace gridnlp::ipm {

// Unreduced Newton system, solved densely.  This is the reference path: the
// condensed direction must match it entry for entry.  The system couples
// (dx, ds, dy) with one extra unknown per finite bound; rows are scaled to
// make the matrix symmetric before factorization:
//   [ W+dw      0      -A^T   -E_lx^T  E_ux^T    0        0     ]
//   [  0        dw      I       0        0      -E_ls^T  E_us^T ]
//   [ -A        I      -dc      0        0       0        0     ]
//   [ -E_lx     0       0      -Glx/Zlx  0       0        0     ]
//   [  E_ux     0       0       0      -Gux/Zux  0        0     ]
//   [  0       -E_ls    0       0        0     -Gls/Zls   0     ]
//   [  0        E_us    0       0        0       0      -Gus/Zus]
// where G* are the bound gaps and E_* select the bounded entries.  At an
// interior point with correct curvature the inertia is
// (n + m, m + #bounds, 0).
class FullKkt {
public:
  FullKkt(index_t n, index_t m, std::span<const index_t> jac_rows,
          std::span<const index_t> jac_cols,
          std::span<const index_t> hess_rows,
          std::span<const index_t> hess_cols, std::span<const double> xl,
          std::span<const double> xu, std::span<const double> sl,
          std::span<const double> su)
      : n_(n),
        m_(m),
        jr_(jac_rows.begin(), jac_rows.end()),
        jc_(jac_cols.begin(), jac_cols.end()),
        hr_(hess_rows.begin(), hess_rows.end()),
        hc_(hess_cols.begin(), hess_cols.end()) {
    for (index_t i = 0; i < n; ++i) {
      if (has_lower(xl[static_cast<size_t>(i)])) lx_.push_back(i);
      if (has_upper(xu[static_cast<size_t>(i)])) ux_.push_back(i);
    }
    for (index_t i = 0; i < m; ++i) {
      if (has_lower(sl[static_cast<size_t>(i)])) ls_.push_back(i);
      if (has_upper(su[static_cast<size_t>(i)])) us_.push_back(i);
    }
    dim_ = n + 2 * m + bound_count();
    xl_.assign(xl.begin(), xl.end());
    xu_.assign(xu.begin(), xu.end());
    sl_.assign(sl.begin(), sl.end());
    su_.assign(su.begin(), su.end());
  }

  index_t dim() const { return dim_; }
  index_t bound_count() const {
    return static_cast<index_t>(lx_.size() + ux_.size() + ls_.size() +
                                us_.size());
  }
  sparse::Inertia expected_inertia() const {
    return sparse::Inertia{n_ + m_, m_ + bound_count(), 0};
  }

  void assemble(std::span<const double> hess_vals,
                std::span<const double> jac_vals, const Iterate& it,
                const Residuals& r, double delta_w, double delta_c) {
    const size_t nd = static_cast<size_t>(dim_);
    a_.assign(nd * nd, 0.0);
    b_.assign(nd, 0.0);
    auto at = [&](index_t row, index_t col) -> double& {
      return a_[static_cast<size_t>(col) * nd + static_cast<size_t>(row)];
    };
    const index_t off_s = n_;
    const index_t off_y = n_ + m_;
    index_t off = n_ + 2 * m_;
    const index_t off_lx = off;
    off += static_cast<index_t>(lx_.size());
    const index_t off_ux = off;
    off += static_cast<index_t>(ux_.size());
    const index_t off_ls = off;
    off += static_cast<index_t>(ls_.size());
    const index_t off_us = off;

    for (size_t k = 0; k < hr_.size(); ++k) {
      at(hr_[k], hc_[k]) += hess_vals[k];
      if (hr_[k] != hc_[k]) at(hc_[k], hr_[k]) += hess_vals[k];
    }
    for (index_t i = 0; i < n_; ++i) at(i, i) += delta_w;
    for (index_t i = 0; i < m_; ++i) at(off_s + i, off_s + i) += delta_w;
    for (size_t k = 0; k < jr_.size(); ++k) {
      at(off_y + jr_[k], jc_[k]) += -jac_vals[k];
      at(jc_[k], off_y + jr_[k]) += -jac_vals[k];
    }
    for (index_t i = 0; i < m_; ++i) {
      at(off_s + i, off_y + i) += 1.0;
      at(off_y + i, off_s + i) += 1.0;
      at(off_y + i, off_y + i) += -delta_c;
    }
    auto bound_rows = [&](const std::vector<index_t>& idx, index_t offset,
                          index_t var_offset, const std::vector<double>& w,
                          const std::vector<double>& z,
                          const std::vector<double>& pz, bool lower_side,
                          const std::vector<double>& bound) {
      for (size_t k = 0; k < idx.size(); ++k) {
        const index_t i = idx[k];
        const index_t row = offset + static_cast<index_t>(k);
        const double sign = lower_side ? -1.0 : 1.0;
        at(row, var_offset + i) += sign;
        at(var_offset + i, row) += sign;
        const double gap = lower_side ? w[static_cast<size_t>(i)] - bound[static_cast<size_t>(i)]
                                      : bound[static_cast<size_t>(i)] - w[static_cast<size_t>(i)];
        at(row, row) += -gap / z[static_cast<size_t>(i)];
        b_[static_cast<size_t>(row)] = pz[static_cast<size_t>(i)] / z[static_cast<size_t>(i)];
      }
    };
    bound_rows(lx_, off_lx, 0, it.x, it.zlx, r.pzlx, true, xl_);
    bound_rows(ux_, off_ux, 0, it.x, it.zux, r.pzux, false, xu_);
    bound_rows(ls_, off_ls, off_s, it.s, it.zls, r.pzls, true, sl_);
    bound_rows(us_, off_us, off_s, it.s, it.zus, r.pzus, false, su_);

    for (index_t i = 0; i < n_; ++i) b_[static_cast<size_t>(i)] = -r.px[static_cast<size_t>(i)];
    for (index_t i = 0; i < m_; ++i) {
      b_[static_cast<size_t>(off_s + i)] = -r.ps[static_cast<size_t>(i)];
      b_[static_cast<size_t>(off_y + i)] = r.py[static_cast<size_t>(i)];
    }
  }

  bool factorize() {
    return bk_.factorize(std::move(a_), dim_);  // assemble() rebuilds a_
  }
  const sparse::Inertia& inertia() const { return bk_.inertia(); }

  // Unpacks the solution into a full-length direction (plus convention).
  void solve(Direction& d) const {
    std::vector<double> u(static_cast<size_t>(dim_));
    bk_.solve(b_, u);
    d.dx.assign(u.begin(), u.begin() + n_);
    d.ds.assign(u.begin() + n_, u.begin() + n_ + m_);
    d.dy.assign(u.begin() + n_ + m_, u.begin() + n_ + 2 * m_);
    d.dzlx.assign(static_cast<size_t>(n_), 0.0);
    d.dzux.assign(static_cast<size_t>(n_), 0.0);
    d.dzls.assign(static_cast<size_t>(m_), 0.0);
    d.dzus.assign(static_cast<size_t>(m_), 0.0);
    size_t p = static_cast<size_t>(n_ + 2 * m_);
    for (index_t i : lx_) d.dzlx[static_cast<size_t>(i)] = u[p++];
    for (index_t i : ux_) d.dzux[static_cast<size_t>(i)] = u[p++];
    for (index_t i : ls_) d.dzls[static_cast<size_t>(i)] = u[p++];
    for (index_t i : us_) d.dzus[static_cast<size_t>(i)] = u[p++];
  }

private:
  index_t n_, m_, dim_ = 0;
  std::vector<index_t> jr_, jc_, hr_, hc_;
  std::vector<index_t> lx_, ux_, ls_, us_;
  std::vector<double> xl_, xu_, sl_, su_;
  std::vector<double> a_, b_;
  sparse::DenseBunchKaufman bk_;
};

}  // namespace gridnlp::ipm
