#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "gridnlp/sparse/matrix.hpp"

namespace gridnlp::sparse {

// Minimal MatrixMarket coordinate-format support: enough to dump systems for
// offline inspection and to round-trip matrices in tests.

inline void write_matrix_market(const std::string& path, const CscPattern& p,
                                std::span<const double> values,
                                bool symmetric_lower) {
  std::ofstream out(path);
  if (!out) throw Error("write_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real "
      << (symmetric_lower ? "symmetric" : "general") << "\n";
  out << p.nrows << " " << p.ncols << " " << p.nnz() << "\n";
  char buf[64];
  for (index_t c = 0; c < p.ncols; ++c) {
    for (index_t k = p.colptr[c]; k < p.colptr[static_cast<size_t>(c) + 1];
         ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", values[k]);
      out << (p.rowidx[k] + 1) << " " << (c + 1) << " " << buf << "\n";
    }
  }
}

struct MatrixMarketData {
  CooPattern pattern;
  std::vector<double> values;
  bool symmetric = false;
};

inline MatrixMarketData read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_matrix_market: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw Error("read_matrix_market: missing header in " + path);
  MatrixMarketData data;
  if (line.find("coordinate") == std::string::npos ||
      line.find("real") == std::string::npos)
    throw Error("read_matrix_market: only coordinate real supported");
  data.symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  long nr = 0, nc = 0, nz = 0;
  if (!(dims >> nr >> nc >> nz))
    throw Error("read_matrix_market: bad size line in " + path);
  data.pattern.nrows = static_cast<index_t>(nr);
  data.pattern.ncols = static_cast<index_t>(nc);
  data.pattern.rows.reserve(nz);
  data.pattern.cols.reserve(nz);
  data.values.reserve(nz);
  for (long k = 0; k < nz; ++k) {
    long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v))
      throw Error("read_matrix_market: truncated entries in " + path);
    data.pattern.rows.push_back(static_cast<index_t>(i - 1));
    data.pattern.cols.push_back(static_cast<index_t>(j - 1));
    data.values.push_back(v);
  }
  return data;
}

}  // namespace gridnlp::sparse
