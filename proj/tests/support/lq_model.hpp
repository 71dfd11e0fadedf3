#pragma once

// Linear-quadratic test fixture: x' = Ax + Bu, L = x'Qx + u'Ru around the
// origin. Everything about its solution is known in closed form through the
// Riccati matrix, which makes it the oracle instance for the solvers.

#include "qrnet/model.hpp"

namespace qrnet::testing {

class LqModel : public DynamicsModel {
 public:
  LqModel(Matrix A, Matrix B, Matrix Q, Matrix R, ControlBounds bounds)
      : A_(std::move(A)), B_(std::move(B)), Q_(std::move(Q)), R_(std::move(R)) {
    eq_.x_f = Vector::Zero(A_.rows());
    eq_.u_f = Vector::Zero(B_.cols());
    bounds_ = std::move(bounds);
  }
  LqModel(Matrix A, Matrix B, Matrix Q, Matrix R)
      : LqModel(std::move(A), std::move(B), std::move(Q), std::move(R),
                ControlBounds::unbounded(B.cols())) {}

  static LqModel double_integrator() {
    Matrix A(2, 2), B(2, 1), Q(2, 2), R(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    Q = Matrix::Identity(2, 2);
    R << 1;
    return LqModel(A, B, Q, R);
  }

  std::string id() const override { return "lq"; }
  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int control_dim() const override { return static_cast<int>(B_.cols()); }
  const EquilibriumPair& equilibrium() const override { return eq_; }
  const ControlBounds& bounds() const override { return bounds_; }

  Vector rhs(const Vector& x, const Vector& u) const override { return A_ * x + B_ * u; }
  double running_cost(const Vector& x, const Vector& u) const override {
    return x.dot(Q_ * x) + u.dot(R_ * u);
  }
  CostQuadratic cost_quadratic() const override { return CostQuadratic{Q_, R_}; }
  SystemLinearization linearize(const Vector&, const Vector&) const override {
    return SystemLinearization{A_, B_};
  }
  Matrix control_jacobian(const Vector&) const override { return B_; }
  Vector cost_state_gradient(const Vector& x, const Vector&) const override { return 2.0 * Q_ * x; }

 private:
  Matrix A_, B_, Q_, R_;
  EquilibriumPair eq_;
  ControlBounds bounds_;
};

}  // namespace qrnet::testing
