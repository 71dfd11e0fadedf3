#pragma once

#include "qrnet/model.hpp"

namespace qrnet {

// Stabilizing solution of Q + A'P + PA - P B R^-1 B' P = 0 with K = R^-1 B' P.
// When a model supplies a design basis T (orthonormal columns), the equation is
// solved on the reduced coordinates z = T'(x - x_f); P_full and K_full are the
// lifted quantities the policies consume.
struct LqrSolution {
  Matrix P;  // reduced, symmetric positive definite
  Matrix K;  // reduced gain
  double riccati_residual = 0.0;
  double closed_loop_abscissa = 0.0;
  Matrix T;       // n x k basis (identity when no reduction applies)
  Matrix P_full;  // T P T'
  Matrix K_full;  // K T'
};

struct RiccatiSettings {
  double stop_tol = 1e-10;     // ||dP/dt||_inf <= stop_tol (1 + ||P||_inf)
  double residual_scale = 1e-8;  // accepted residual <= scale (1 + ||Q||_inf)
  double t_max = 1e6;
  int refine_max_dim = 40;     // Newton polish via Kronecker Lyapunov solves
};

LqrSolution solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                          const RiccatiSettings& settings = {});

// Linearize the model at its equilibrium, project onto the model's LQR basis,
// solve, and lift.
LqrSolution lqr_for_model(const DynamicsModel& model, const RiccatiSettings& settings = {});

// u(x) = u_f - K_full (x - x_f); exact state Jacobian -K_full everywhere.
// Companion value evaluator (x-x_f)' P_full (x-x_f) with gradient 2 P_full (x-x_f).
class LqrPolicy {
 public:
  LqrPolicy(const LqrSolution& sol, EquilibriumPair eq) : sol_(sol), eq_(std::move(eq)) {}

  Vector operator()(const Vector& x) const { return eq_.u_f - sol_.K_full * (x - eq_.x_f); }
  Matrix state_jacobian(const Vector&) const { return -sol_.K_full; }
  double value(const Vector& x) const {
    const Vector d = x - eq_.x_f;
    return d.dot(sol_.P_full * d);
  }
  Vector value_gradient(const Vector& x) const { return 2.0 * sol_.P_full * (x - eq_.x_f); }

  const LqrSolution& solution() const { return sol_; }
  const EquilibriumPair& equilibrium() const { return eq_; }

 private:
  LqrSolution sol_;
  EquilibriumPair eq_;
};

inline LqrPolicy lqr_policy(const LqrSolution& sol, const EquilibriumPair& eq) {
  require(sol.K_full.cols() == eq.x_f.size() && sol.K_full.rows() == eq.u_f.size(),
          "lqr_policy: dimension mismatch");
  return LqrPolicy(sol, eq);
}

}  // namespace qrnet
