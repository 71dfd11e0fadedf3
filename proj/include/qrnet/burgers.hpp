#pragma once

#include "qrnet/model.hpp"

namespace qrnet {

// Chebyshev-collocated reaction-convection-diffusion system
//   x' = -1/2 (D x) o x + nu D^2 x + alpha o x o exp(-beta x) + B u
// on Dirichlet interior nodes, with quadratic cost x'Qx + u'Ru.
// `n` counts interior collocation nodes; the underlying grid has n+2 points.
struct BurgersConfig {
  int n = 64;
  int m = 2;
  double nu = 0.2;
  double beta = 1.0;
  Vector alpha;        // reaction gains at interior nodes (n)
  Matrix b_cols;       // actuator spatial profiles (n x m)
  Vector q_diag;       // state cost weights (n)
  Vector r_diag;       // control cost weights (m)
  bool has_bounds = false;
  Vector u_min, u_max;

  // Shipped defaults: alpha(xi) = 2 exp(-9 xi^2), Gaussian actuator bumps at
  // xi = +/- 0.5 with width^2 = 0.04, Q = Clenshaw-Curtis weights, R = 0.1 I.
  static BurgersConfig defaults(int n = 64, int m = 2);
};

class BurgersModel : public DynamicsModel {
 public:
  explicit BurgersModel(BurgersConfig cfg);

  std::string id() const override { return "burgers"; }
  int state_dim() const override { return cfg_.n; }
  int control_dim() const override { return cfg_.m; }
  const EquilibriumPair& equilibrium() const override { return eq_; }
  const ControlBounds& bounds() const override { return bounds_; }

  Vector rhs(const Vector& x, const Vector& u) const override;
  double running_cost(const Vector& x, const Vector& u) const override;
  CostQuadratic cost_quadratic() const override;
  SystemLinearization linearize(const Vector& x, const Vector& u) const override;
  Matrix control_jacobian(const Vector&) const override { return B_; }
  Vector cost_state_gradient(const Vector& x, const Vector& u) const override;

  const BurgersConfig& config() const { return cfg_; }
  const Matrix& diff_interior() const { return D_; }
  const Matrix& diff2_interior() const { return D2_; }
  const Vector& grid_interior() const { return xi_; }

  // Spectral abscissa of the open-loop linearization at the origin.
  double open_loop_abscissa() const;

 private:
  BurgersConfig cfg_;
  Matrix D_, D2_, B_;
  Vector xi_;
  EquilibriumPair eq_;
  ControlBounds bounds_;
};

}  // namespace qrnet
