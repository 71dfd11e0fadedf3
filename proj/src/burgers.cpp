#include "qrnet/burgers.hpp"

#include <cmath>

#include "qrnet/chebyshev.hpp"
#include "qrnet/spectral.hpp"

namespace qrnet {

BurgersConfig BurgersConfig::defaults(int n, int m) {
  require(n >= 2, "BurgersConfig: n must be >= 2");
  require(m >= 1, "BurgersConfig: m must be >= 1");
  BurgersConfig cfg;
  cfg.n = n;
  cfg.m = m;
  const int N = n + 1;  // grid index bound, n interior nodes
  const Vector xi_full = chebyshev_nodes(N);
  const Vector xi = xi_full.segment(1, n);

  cfg.alpha.resize(n);
  for (int j = 0; j < n; ++j) cfg.alpha[j] = 2.0 * std::exp(-9.0 * xi[j] * xi[j]);

  cfg.b_cols.resize(n, m);
  for (int k = 0; k < m; ++k) {
    // actuators centered at +0.5, -0.5, alternating further out if m > 2
    const double center = (k % 2 == 0 ? 0.5 : -0.5) * (1.0 + (k / 2) * 0.6);
    for (int j = 0; j < n; ++j) {
      const double d = xi[j] - center;
      cfg.b_cols(j, k) = std::exp(-d * d / 0.04);
    }
  }

  const Vector w = clenshaw_curtis_weights(N);
  cfg.q_diag = w.segment(1, n);
  cfg.r_diag = Vector::Constant(m, 0.1);
  return cfg;
}

BurgersModel::BurgersModel(BurgersConfig cfg) : cfg_(std::move(cfg)) {
  const int n = cfg_.n;
  require(cfg_.nu > 0.0, "BurgersModel: nu must be positive");
  require(cfg_.beta > 0.0, "BurgersModel: beta must be positive");
  require(cfg_.alpha.size() == n, "BurgersModel: alpha size mismatch");
  require(cfg_.b_cols.rows() == n && cfg_.b_cols.cols() == cfg_.m, "BurgersModel: B shape mismatch");
  require(cfg_.q_diag.size() == n && cfg_.r_diag.size() == cfg_.m, "BurgersModel: cost shape mismatch");
  require((cfg_.q_diag.array() >= 0.0).all(), "BurgersModel: Q must be positive semidefinite");
  require((cfg_.r_diag.array() > 0.0).all(), "BurgersModel: R must be positive definite");

  const int N = n + 1;
  const Matrix D = chebyshev_diff_matrix(N);
  const Matrix D2 = D * D;
  D_ = D.block(1, 1, n, n);
  D2_ = D2.block(1, 1, n, n);
  xi_ = chebyshev_nodes(N).segment(1, n);
  B_ = cfg_.b_cols;

  eq_.x_f = Vector::Zero(n);
  eq_.u_f = Vector::Zero(cfg_.m);
  if (cfg_.has_bounds) {
    bounds_ = ControlBounds::box(cfg_.u_min, cfg_.u_max);
    bounds_.validate(eq_.u_f);
  } else {
    bounds_ = ControlBounds::unbounded(cfg_.m);
  }
}

Vector BurgersModel::rhs(const Vector& x, const Vector& u) const {
  require(x.size() == cfg_.n && u.size() == cfg_.m, "burgers rhs: dimension mismatch");
  require(all_finite(x) && all_finite(u), "burgers rhs: non-finite input");
  const Vector react = cfg_.alpha.array() * x.array() * (-cfg_.beta * x.array()).exp();
  return -0.5 * (D_ * x).cwiseProduct(x) + cfg_.nu * (D2_ * x) + react + B_ * u;
}

double BurgersModel::running_cost(const Vector& x, const Vector& u) const {
  require(x.size() == cfg_.n && u.size() == cfg_.m, "burgers cost: dimension mismatch");
  require(all_finite(x) && all_finite(u), "burgers cost: non-finite input");
  return (cfg_.q_diag.array() * x.array().square()).sum() +
         (cfg_.r_diag.array() * u.array().square()).sum();
}

CostQuadratic BurgersModel::cost_quadratic() const {
  CostQuadratic c;
  c.Q = cfg_.q_diag.asDiagonal();
  c.R = cfg_.r_diag.asDiagonal();
  return c;
}

SystemLinearization BurgersModel::linearize(const Vector& x, const Vector& u) const {
  require(x.size() == cfg_.n && u.size() == cfg_.m, "burgers linearize: dimension mismatch");
  SystemLinearization lin;
  // d/dx of alpha o x o exp(-beta x) = diag(alpha o exp(-beta x) o (1 - beta x))
  const Vector rdiag =
      cfg_.alpha.array() * (-cfg_.beta * x.array()).exp() * (1.0 - cfg_.beta * x.array());
  const Vector Dx = D_ * x;
  lin.A = -0.5 * (Matrix(Dx.asDiagonal()) + x.asDiagonal() * D_) + cfg_.nu * D2_ +
          Matrix(rdiag.asDiagonal());
  lin.B = B_;
  require(all_finite(lin.A), "burgers linearize: non-finite Jacobian");
  return lin;
}

Vector BurgersModel::cost_state_gradient(const Vector& x, const Vector&) const {
  return 2.0 * cfg_.q_diag.cwiseProduct(x);
}

double BurgersModel::open_loop_abscissa() const {
  const SystemLinearization lin = linearize(eq_.x_f, eq_.u_f);
  return spectral_abscissa(lin.A);
}

}  // namespace qrnet
