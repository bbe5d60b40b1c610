#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/sparse/amd.hpp"
#include "gridnlp/sparse/matrix.hpp"

namespace gridnlp::sparse {

struct Inertia {
  index_t positive = 0;
  index_t negative = 0;
  index_t zero = 0;
  bool operator==(const Inertia&) const = default;
};

struct LdltOptions {
  // Pivots with |d| below pivot_floor_rel * max|diag(A)| are flushed to
  // sign(d) * floor and reported; the factorization never divides by zero.
  double pivot_floor_rel = 1e-12;
};

// Simplicial LDL^T for quasi-definite symmetric systems, up-looking rows,
// fill-reducing permutation fixed at analyse time.  The symbolic phase
// (ordering, elimination tree, column counts) runs once per sparsity
// pattern; factorize() reuses it for any values on that pattern.
class LdltSolver {
public:
  // `lower` holds the lower triangle (diagonal included where structurally
  // present).  An empty `perm` requests the built-in AMD ordering.
  explicit LdltSolver(CscPattern lower, std::vector<index_t> perm = {},
                      LdltOptions opts = {})
      : lower_(std::move(lower)), opts_(opts) {
    if (lower_.nrows != lower_.ncols)
      throw Error("LdltSolver: matrix must be square");
    n_ = lower_.nrows;
    perm_ = perm.empty() ? amd_order(lower_) : std::move(perm);
    if (static_cast<index_t>(perm_.size()) != n_)
      throw Error("LdltSolver: permutation size mismatch");
    pinv_.assign(n_, -1);
    for (index_t k = 0; k < n_; ++k) {
      if (perm_[k] < 0 || perm_[k] >= n_ || pinv_[perm_[k]] != -1)
        throw Error("LdltSolver: not a permutation");
      pinv_[perm_[k]] = k;
    }
    analyse();
  }

  index_t dim() const { return n_; }
  const std::vector<index_t>& permutation() const { return perm_; }
  index_t factor_nnz() const { return Lp_.empty() ? 0 : Lp_[n_]; }

  // Numeric factorization of the values on the analysed pattern.
  void factorize(std::span<const double> lower_values) {
    if (static_cast<index_t>(lower_values.size()) != lower_.nnz())
      throw Error("LdltSolver::factorize: value count mismatch");
    // Scatter values into the permuted upper-triangular layout.
    std::fill(Ux_.begin(), Ux_.end(), 0.0);
    for (size_t k = 0; k < slot_map_.size(); ++k)
      Ux_[static_cast<size_t>(slot_map_[k])] += lower_values[k];

    double max_diag = 0.0;
    for (index_t j = 0; j < n_; ++j)
      if (diag_slot_[j] >= 0)
        max_diag = std::max(max_diag, std::abs(Ux_[diag_slot_[j]]));
    const double floor = opts_.pivot_floor_rel * std::max(max_diag, 1.0);

    inertia_ = Inertia{};
    floored_ = 0;
    std::vector<double>& y = work_y_;
    std::vector<index_t>& pattern = work_pattern_;
    std::vector<index_t>& flag = work_flag_;
    std::vector<index_t>& lnz_used = work_lnz_;
    std::fill(flag.begin(), flag.end(), -1);
    std::fill(lnz_used.begin(), lnz_used.end(), 0);

    for (index_t k = 0; k < n_; ++k) {
      // Sparse triangular solve for row k of L: pattern is the union of
      // etree paths from the entries of (permuted) column k of the upper
      // triangle; values via the usual up-looking recurrence.
      index_t top = n_;
      y[k] = 0.0;
      flag[k] = k;
      for (index_t u = Up_[k]; u < Up_[static_cast<size_t>(k) + 1]; ++u) {
        const index_t i = Ui_[u];
        y[i] += Ux_[u];  // accumulate, duplicates already merged
        index_t len = 0;
        for (index_t t = i; flag[t] != k; t = parent_[t]) {
          pattern[len++] = t;
          flag[t] = k;
        }
        while (len > 0) pattern[--top] = pattern[--len];
      }
      double dk = y[k];
      y[k] = 0.0;
      for (index_t s = top; s < n_; ++s) {
        const index_t i = pattern[s];
        const double yi = y[i];
        y[i] = 0.0;
        const double lki = yi / D_[i];
        // y -= L(k,i) * L(:,i) restricted to later pattern entries
        for (index_t q = Lp_[i]; q < Lp_[i] + lnz_used[i]; ++q)
          y[Li_[q]] -= Lx_[q] * yi;
        dk -= lki * yi;
        const index_t q = Lp_[i] + lnz_used[i]++;
        Li_[q] = k;
        Lx_[q] = lki;
      }
      // Static pivoting: record the sign before flushing tiny pivots.
      if (dk > floor)
        ++inertia_.positive;
      else if (dk < -floor)
        ++inertia_.negative;
      else {
        ++inertia_.zero;
        ++floored_;
        dk = (dk >= 0.0) ? floor : -floor;
      }
      D_[k] = dk;
    }
    factorized_ = true;
  }

  const Inertia& inertia() const { return inertia_; }
  index_t floored_pivots() const { return floored_; }

  // x = A^{-1} b using the stored factors.
  void solve(std::span<const double> b, std::span<double> x) const {
    if (!factorized_) throw Error("LdltSolver::solve before factorize");
    std::vector<double>& y = work_solve_;
    for (index_t k = 0; k < n_; ++k) y[k] = b[perm_[k]];
    for (index_t k = 0; k < n_; ++k)
      for (index_t q = Lp_[k]; q < Lp_[static_cast<size_t>(k) + 1]; ++q)
        y[Li_[q]] -= Lx_[q] * y[k];
    for (index_t k = 0; k < n_; ++k) y[k] /= D_[k];
    for (index_t k = n_ - 1; k >= 0; --k) {
      double acc = y[k];
      for (index_t q = Lp_[k]; q < Lp_[static_cast<size_t>(k) + 1]; ++q)
        acc -= Lx_[q] * y[Li_[q]];
      y[k] = acc;
    }
    for (index_t k = 0; k < n_; ++k) x[perm_[k]] = y[k];
  }

  // Iterative refinement against the original symmetric matrix (same values
  // that were factorized, possibly held by the caller).  Returns the final
  // residual infinity norm.
  double refine(std::span<const double> lower_values,
                std::span<const double> b, std::span<double> x,
                int passes) const {
    std::vector<double> r(n_), dx(n_);
    double rnorm = 0.0;
    for (int it = 0; it < std::max(passes, 0); ++it) {
      csc_symmetric_matvec(lower_, lower_values, x, r);
      for (index_t i = 0; i < n_; ++i) r[i] = b[i] - r[i];
      solve(r, dx);
      for (index_t i = 0; i < n_; ++i) x[i] += dx[i];
    }
    csc_symmetric_matvec(lower_, lower_values, x, r);
    for (index_t i = 0; i < n_; ++i) rnorm = std::max(rnorm, std::abs(b[i] - r[i]));
    return rnorm;
  }

private:
  void analyse() {
    // Permuted upper-triangular pattern: original (r,c) maps to
    // (min(pinv r, pinv c), max(...)) stored by column.
    CooPattern up;
    up.nrows = up.ncols = n_;
    up.rows.reserve(lower_.nnz());
    up.cols.reserve(lower_.nnz());
    for (index_t c = 0; c < n_; ++c) {
      for (index_t k = lower_.colptr[c];
           k < lower_.colptr[static_cast<size_t>(c) + 1]; ++k) {
        const index_t i = pinv_[lower_.rowidx[k]];
        const index_t j = pinv_[c];
        up.rows.push_back(std::min(i, j));
        up.cols.push_back(std::max(i, j));
      }
    }
    CscPattern upper = compress_to_csc(up, slot_map_);
    Up_ = std::move(upper.colptr);
    Ui_ = std::move(upper.rowidx);
    Ux_.assign(Ui_.size(), 0.0);

    diag_slot_.assign(n_, -1);
    for (index_t j = 0; j < n_; ++j)
      for (index_t k = Up_[j]; k < Up_[static_cast<size_t>(j) + 1]; ++k)
        if (Ui_[k] == j) diag_slot_[j] = k;

    // Elimination tree and exact column counts of L in one sweep.
    parent_.assign(n_, -1);
    std::vector<index_t> lnz(n_, 0), flag(n_, -1);
    for (index_t k = 0; k < n_; ++k) {
      flag[k] = k;
      for (index_t u = Up_[k]; u < Up_[static_cast<size_t>(k) + 1]; ++u) {
        index_t i = Ui_[u];
        if (i >= k) continue;
        while (flag[i] != k) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz[i];
          flag[i] = k;
          i = parent_[i];
        }
      }
    }
    Lp_.assign(static_cast<size_t>(n_) + 1, 0);
    for (index_t j = 0; j < n_; ++j) Lp_[static_cast<size_t>(j) + 1] = Lp_[j] + lnz[j];
    Li_.assign(Lp_[n_], 0);
    Lx_.assign(Lp_[n_], 0.0);
    D_.assign(n_, 0.0);
    work_y_.assign(n_, 0.0);
    work_pattern_.assign(n_, 0);
    work_flag_.assign(n_, -1);
    work_lnz_.assign(n_, 0);
    work_solve_.assign(n_, 0.0);
  }

  CscPattern lower_;
  LdltOptions opts_;
  index_t n_ = 0;
  std::vector<index_t> perm_, pinv_;
  std::vector<index_t> slot_map_;      // original slot -> permuted upper slot
  std::vector<index_t> Up_, Ui_;       // permuted upper pattern
  std::vector<double> Ux_;
  std::vector<index_t> diag_slot_;
  std::vector<index_t> parent_;        // elimination tree
  std::vector<index_t> Lp_, Li_;
  std::vector<double> Lx_, D_;
  Inertia inertia_;
  index_t floored_ = 0;
  bool factorized_ = false;
  mutable std::vector<double> work_y_, work_solve_;
  mutable std::vector<index_t> work_pattern_, work_flag_, work_lnz_;
};

}  // namespace gridnlp::sparse
