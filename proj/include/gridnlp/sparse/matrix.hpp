#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "gridnlp/common.hpp"

namespace gridnlp::sparse {

// Coordinate-format structure.  Slot k refers to entry (rows[k], cols[k]);
// callers keep value arrays indexed by slot, so repeated entries act as
// disjoint accumulation targets and are summed on compression.
struct CooPattern {
  index_t nrows = 0;
  index_t ncols = 0;
  std::vector<index_t> rows;
  std::vector<index_t> cols;

  index_t nnz() const { return static_cast<index_t>(rows.size()); }
};

struct CscPattern {
  index_t nrows = 0;
  index_t ncols = 0;
  std::vector<index_t> colptr;  // size ncols + 1
  std::vector<index_t> rowidx;  // size nnz, rows ascending within a column

  index_t nnz() const { return static_cast<index_t>(rowidx.size()); }
};

struct CsrPattern {
  index_t nrows = 0;
  index_t ncols = 0;
  std::vector<index_t> rowptr;
  std::vector<index_t> colidx;

  index_t nnz() const { return static_cast<index_t>(colidx.size()); }
};

// Compress a COO structure to CSC, merging duplicate coordinates.  slot_map
// gets one entry per COO slot: the CSC value position the slot accumulates
// into.  Deterministic for a fixed input ordering.
inline CscPattern compress_to_csc(const CooPattern& coo,
                                  std::vector<index_t>& slot_map) {
  const index_t nnz = coo.nnz();
  for (index_t k = 0; k < nnz; ++k) {
    if (coo.rows[k] < 0 || coo.rows[k] >= coo.nrows || coo.cols[k] < 0 ||
        coo.cols[k] >= coo.ncols)
      throw Error("compress_to_csc: coordinate out of range");
  }
  std::vector<index_t> order(nnz);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    if (coo.cols[a] != coo.cols[b]) return coo.cols[a] < coo.cols[b];
    return coo.rows[a] < coo.rows[b];
  });

  CscPattern csc;
  csc.nrows = coo.nrows;
  csc.ncols = coo.ncols;
  csc.colptr.assign(static_cast<size_t>(coo.ncols) + 1, 0);
  csc.rowidx.reserve(nnz);
  slot_map.assign(nnz, -1);

  index_t last_col = -1, last_row = -1;
  for (index_t k : order) {
    const index_t c = coo.cols[k], r = coo.rows[k];
    if (c != last_col || r != last_row) {
      csc.rowidx.push_back(r);
      csc.colptr[static_cast<size_t>(c) + 1]++;
      last_col = c;
      last_row = r;
    }
    slot_map[k] = static_cast<index_t>(csc.rowidx.size()) - 1;
  }
  for (index_t c = 0; c < coo.ncols; ++c)
    csc.colptr[static_cast<size_t>(c) + 1] += csc.colptr[c];
  return csc;
}

inline CsrPattern compress_to_csr(const CooPattern& coo,
                                  std::vector<index_t>& slot_map) {
  CooPattern t;  // compress the transpose through the CSC path
  t.nrows = coo.ncols;
  t.ncols = coo.nrows;
  t.rows = coo.cols;
  t.cols = coo.rows;
  CscPattern csc = compress_to_csc(t, slot_map);
  CsrPattern csr;
  csr.nrows = coo.nrows;
  csr.ncols = coo.ncols;
  csr.rowptr = std::move(csc.colptr);
  csr.colidx = std::move(csc.rowidx);
  return csr;
}

// Accumulate slot-indexed COO values into compressed storage.
inline void scatter_values(std::span<const index_t> slot_map,
                           std::span<const double> coo_values,
                           std::span<double> packed_values) {
  std::fill(packed_values.begin(), packed_values.end(), 0.0);
  for (size_t k = 0; k < slot_map.size(); ++k)
    packed_values[static_cast<size_t>(slot_map[k])] += coo_values[k];
}

// y = A*x for a general CSC matrix.
inline void csc_matvec(const CscPattern& p, std::span<const double> values,
                       std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  for (index_t c = 0; c < p.ncols; ++c)
    for (index_t k = p.colptr[c]; k < p.colptr[static_cast<size_t>(c) + 1]; ++k)
      y[p.rowidx[k]] += values[k] * x[c];
}

// y = A*x where only the lower triangle of symmetric A is stored.
inline void csc_symmetric_matvec(const CscPattern& p,
                                 std::span<const double> values,
                                 std::span<const double> x,
                                 std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  for (index_t c = 0; c < p.ncols; ++c) {
    for (index_t k = p.colptr[c]; k < p.colptr[static_cast<size_t>(c) + 1];
         ++k) {
      const index_t r = p.rowidx[k];
      y[r] += values[k] * x[c];
      if (r != c) y[c] += values[k] * x[r];
    }
  }
}

// y = A*x and yt = A^T*v helpers for CSR (used for Jacobian products).
inline void csr_matvec(const CsrPattern& p, std::span<const double> values,
                       std::span<const double> x, std::span<double> y) {
  for (index_t r = 0; r < p.nrows; ++r) {
    double acc = 0.0;
    for (index_t k = p.rowptr[r]; k < p.rowptr[static_cast<size_t>(r) + 1];
         ++k)
      acc += values[k] * x[p.colidx[k]];
    y[r] = acc;
  }
}

inline void csr_matvec_transpose(const CsrPattern& p,
                                 std::span<const double> values,
                                 std::span<const double> v,
                                 std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  for (index_t r = 0; r < p.nrows; ++r)
    for (index_t k = p.rowptr[r]; k < p.rowptr[static_cast<size_t>(r) + 1];
         ++k)
      y[p.colidx[k]] += values[k] * v[r];
}

}  // namespace gridnlp::sparse
