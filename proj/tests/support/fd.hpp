#pragma once

// Central finite-difference oracles used to verify analytic derivatives.

#include <functional>

#include "qrnet/types.hpp"

namespace qrnet::testing {

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double h_rel = 1e-6) {
  const Vector f0 = f(x);
  Matrix J(f0.size(), x.size());
  Vector xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = h_rel * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h_rel = 1e-6) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = h_rel * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

// max relative error, entries below `floor` in both compared absolutely
inline double rel_err(const Matrix& a, const Matrix& b, double floor = 1e-10) {
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      const double scale = std::max(std::abs(a(i, j)), std::abs(b(i, j)));
      if (scale < floor) continue;
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace qrnet::testing
