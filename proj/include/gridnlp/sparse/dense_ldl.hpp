#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/sparse/ldlt.hpp"

namespace gridnlp::sparse {

// Dense symmetric indefinite factorization with Bunch-Kaufman partial
// pivoting (lower triangle, unblocked).  Exists as the reference solver:
// exact inertia, no static pivoting, usable on any symmetric matrix that
// fits densely.  Column-major storage, only the lower triangle is read.
class DenseBunchKaufman {
public:
  DenseBunchKaufman() = default;

  // a: n*n column-major symmetric matrix (lower triangle significant).
  bool factorize(std::vector<double> a, index_t n) {
    a_ = std::move(a);
    n_ = n;
    if (static_cast<size_t>(n_) * n_ != a_.size())
      throw Error("DenseBunchKaufman: size mismatch");
    ipiv_.assign(n_, 0);
    inertia_ = Inertia{};
    singular_ = false;

    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
    index_t k = 0;
    while (k < n_) {
      index_t kstep = 1;
      index_t kp = k;
      const double absakk = std::abs(at(k, k));

      // Largest off-diagonal magnitude in column k below the diagonal.
      index_t imax = -1;
      double colmax = 0.0;
      for (index_t i = k + 1; i < n_; ++i) {
        const double v = std::abs(at(i, k));
        if (v > colmax) {
          colmax = v;
          imax = i;
        }
      }

      if (std::max(absakk, colmax) == 0.0) {
        // Entire column is zero: a structurally zero pivot.
        singular_ = true;
        ++inertia_.zero;
        ipiv_[k] = k;
        ++k;
        continue;
      }

      if (absakk >= alpha * colmax) {
        kp = k;  // 1x1 pivot, no interchange
      } else {
        // rowmax = largest magnitude in row imax among remaining columns.
        double rowmax = 0.0;
        for (index_t j = k; j < imax; ++j)
          rowmax = std::max(rowmax, std::abs(at(imax, j)));
        for (index_t i = imax + 1; i < n_; ++i)
          rowmax = std::max(rowmax, std::abs(at(i, imax)));
        if (absakk * rowmax >= alpha * colmax * colmax) {
          kp = k;  // 1x1 pivot still acceptable
        } else if (std::abs(at(imax, imax)) >= alpha * rowmax) {
          kp = imax;  // 1x1 pivot with interchange
        } else {
          kp = imax;  // 2x2 pivot with interchange of k+1 and imax
          kstep = 2;
        }
      }

      const index_t kk = (kstep == 2) ? k + 1 : k;
      if (kp != kk) swap_trailing(k, kk, kp);

      if (kstep == 1) {
        const double d = at(k, k);
        (d > 0.0) ? ++inertia_.positive : ++inertia_.negative;
        for (index_t j = k + 1; j < n_; ++j) {
          const double ljk = at(j, k) / d;
          for (index_t i = j; i < n_; ++i) at(i, j) -= ljk * at(i, k);
        }
        for (index_t i = k + 1; i < n_; ++i) at(i, k) /= d;
        ipiv_[k] = kp;
      } else {
        // 2x2 pivot block [[d11, d21], [d21, d22]]; always one positive and
        // one negative eigenvalue under the Bunch-Kaufman criterion.
        const double d11 = at(k, k), d21 = at(k + 1, k), d22 = at(k + 1, k + 1);
        const double det = d11 * d22 - d21 * d21;
        ++inertia_.positive;
        ++inertia_.negative;
        for (index_t j = k + 2; j < n_; ++j) {
          const double w1 = at(j, k), w2 = at(j, k + 1);
          const double l1 = (d22 * w1 - d21 * w2) / det;
          const double l2 = (d11 * w2 - d21 * w1) / det;
          for (index_t i = j; i < n_; ++i)
            at(i, j) -= l1 * at(i, k) + l2 * at(i, k + 1);
        }
        for (index_t j = k + 2; j < n_; ++j) {
          const double w1 = at(j, k), w2 = at(j, k + 1);
          at(j, k) = (d22 * w1 - d21 * w2) / det;
          at(j, k + 1) = (d11 * w2 - d21 * w1) / det;
        }
        ipiv_[k] = -(kp + 1);
        ipiv_[k + 1] = -(kp + 1);
      }
      k += kstep;
    }
    return !singular_;
  }

  const Inertia& inertia() const { return inertia_; }
  bool singular() const { return singular_; }

  // Solve A x = b with the stored factors (fails if singular).
  void solve(std::span<const double> b, std::span<double> x) const {
    if (singular_) throw Error("DenseBunchKaufman::solve: singular matrix");
    std::vector<double> y(b.begin(), b.end());

    // Forward: apply interchanges and L^{-1}, descending the pivot blocks.
    index_t k = 0;
    while (k < n_) {
      if (ipiv_[k] >= 0) {
        if (ipiv_[k] != k) std::swap(y[k], y[ipiv_[k]]);
        for (index_t i = k + 1; i < n_; ++i) y[i] -= at(i, k) * y[k];
        ++k;
      } else {
        const index_t kp = -(ipiv_[k] + 1);
        if (kp != k + 1) std::swap(y[k + 1], y[kp]);
        for (index_t i = k + 2; i < n_; ++i)
          y[i] -= at(i, k) * y[k] + at(i, k + 1) * y[k + 1];
        k += 2;
      }
    }
    // Diagonal blocks.
    k = 0;
    while (k < n_) {
      if (ipiv_[k] >= 0) {
        y[k] /= at(k, k);
        ++k;
      } else {
        const double d11 = at(k, k), d21 = at(k + 1, k),
                     d22 = at(k + 1, k + 1);
        const double det = d11 * d22 - d21 * d21;
        const double y1 = y[k], y2 = y[k + 1];
        y[k] = (d22 * y1 - d21 * y2) / det;
        y[k + 1] = (d11 * y2 - d21 * y1) / det;
        k += 2;
      }
    }
    // Backward: L^{-T} and interchanges in reverse.
    k = n_ - 1;
    while (k >= 0) {
      if (ipiv_[k] >= 0) {
        double acc = y[k];
        for (index_t i = k + 1; i < n_; ++i) acc -= at(i, k) * y[i];
        y[k] = acc;
        if (ipiv_[k] != k) std::swap(y[k], y[ipiv_[k]]);
        --k;
      } else {
        double acc0 = y[k - 1], acc1 = y[k];
        for (index_t i = k + 1; i < n_; ++i) {
          acc0 -= at(i, k - 1) * y[i];
          acc1 -= at(i, k) * y[i];
        }
        y[k - 1] = acc0;
        y[k] = acc1;
        const index_t kp = -(ipiv_[k] + 1);
        if (kp != k) std::swap(y[k], y[kp]);
        k -= 2;
      }
    }
    std::copy(y.begin(), y.end(), x.begin());
  }

private:
  double& at(index_t i, index_t j) { return a_[static_cast<size_t>(j) * n_ + i]; }
  double at(index_t i, index_t j) const {
    return a_[static_cast<size_t>(j) * n_ + i];
  }

  // Swap rows/columns r and s (kbase <= r < s) inside the trailing submatrix
  // A(kbase:, kbase:), touching only the lower triangle.  Columns < kbase
  // hold finished L factors and stay put; the solve replays the interchanges
  // from ipiv instead.
  void swap_trailing(index_t kbase, index_t r, index_t s) {
    if (r > s) std::swap(r, s);
    for (index_t j = kbase; j < r; ++j) std::swap(at(r, j), at(s, j));
    for (index_t i = r + 1; i < s; ++i) std::swap(at(i, r), at(s, i));
    for (index_t i = s + 1; i < n_; ++i) std::swap(at(i, r), at(i, s));
    std::swap(at(r, r), at(s, s));
  }

  std::vector<double> a_;
  index_t n_ = 0;
  std::vector<index_t> ipiv_;
  Inertia inertia_;
  bool singular_ = false;
};

}  // namespace gridnlp::sparse
