#pragma once

#include <functional>
#include <span>
#include <vector>

// Central finite differences used as derivative oracles in tests.

inline std::vector<double> fd_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Dense m x n Jacobian (row-major) of a vector function.
inline std::vector<double> fd_jacobian(
    const std::function<std::vector<double>(std::span<const double>)>& g,
    std::vector<double> x, size_t m, double h = 1e-6) {
  std::vector<double> jac(m * x.size());
  for (size_t j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    x[j] = xj + h;
    std::vector<double> gp = g(x);
    x[j] = xj - h;
    std::vector<double> gm = g(x);
    x[j] = xj;
    for (size_t i = 0; i < m; ++i) jac[i * x.size() + j] = (gp[i] - gm[i]) / (2.0 * h);
  }
  return jac;
}

// Dense n x n Hessian via the four-point second difference; h around 1e-4
// balances truncation and roundoff for well-scaled functions.
inline std::vector<double> fd_hessian(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> x, double h = 1e-4) {
  const size_t n = x.size();
  std::vector<double> hess(n * n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      const double xi = x[i], xj = x[j];
      double v;
      if (i == j) {
        const double f0 = f(x);
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        v = (fp - 2.0 * f0 + fm) / (h * h);
      } else {
        x[i] = xi + h; x[j] = xj + h;
        const double fpp = f(x);
        x[j] = xj - h;
        const double fpm = f(x);
        x[i] = xi - h; x[j] = xj + h;
        const double fmp = f(x);
        x[j] = xj - h;
        const double fmm = f(x);
        x[i] = xi; x[j] = xj;
        v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
      hess[i * n + j] = v;
      hess[j * n + i] = v;
    }
  }
  return hess;
}
