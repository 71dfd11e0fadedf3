#include "qrnet/lqr.hpp"

#include <cmath>
#include <sstream>

#include "qrnet/ode.hpp"
#include "qrnet/spectral.hpp"

namespace qrnet {

namespace {

Matrix riccati_residual_matrix(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               const Matrix& P) {
  const Matrix BRinvBt = B * R.llt().solve(B.transpose());
  return Q + A.transpose() * P + P * A - P * BRinvBt * P;
}

// Solve Acl' X + X Acl = -C by vectorization (small dimensions only).
Matrix solve_lyapunov(const Matrix& Acl, const Matrix& C) {
  const int k = static_cast<int>(Acl.rows());
  Matrix M = Matrix::Zero(k * k, k * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const int row = i + j * k;
      for (int p = 0; p < k; ++p) {
        M(row, p + j * k) += Acl(p, i);   // (Acl' X)_{ij} = sum_p Acl(p,i) X(p,j)
        M(row, i + p * k) += Acl(p, j);   // (X Acl)_{ij}  = sum_p X(i,p) Acl(p,j)
      }
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(C.data(), k * k);
  const Vector xv = M.partialPivLu().solve(rhs);
  Matrix X = Eigen::Map<const Matrix>(xv.data(), k, k);
  return 0.5 * (X + X.transpose());
}

}  // namespace

LqrSolution solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                          const RiccatiSettings& st) {
  const int k = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  require(A.cols() == k && B.rows() == k, "solve_riccati: A/B shape mismatch");
  require(Q.rows() == k && Q.cols() == k, "solve_riccati: Q shape mismatch");
  require(R.rows() == m && R.cols() == m, "solve_riccati: R shape mismatch");
  require(inf_norm(Matrix(Q - Q.transpose())) <= 1e-10 * (1.0 + inf_norm(Q)),
          "solve_riccati: Q not symmetric");
  Eigen::LLT<Matrix> rllt(0.5 * (R + R.transpose()));
  require(rllt.info() == Eigen::Success, "solve_riccati: R not positive definite");

  const Matrix BRinvBt = B * rllt.solve(B.transpose());
  auto dre_rhs = [&](const Matrix& P) -> Matrix {
    return Q + A.transpose() * P + P * A - P * BRinvBt * P;
  };

  // Integrate P' = Q + A'P + PA - P B R^-1 B' P from P = 0 to steady state.
  Vector y = Vector::Zero(k * k);
  auto f = [&](double, const Vector& v) -> Vector {
    const Matrix P = Eigen::Map<const Matrix>(v.data(), k, k);
    const Matrix dP = dre_rhs(P);
    return Eigen::Map<const Vector>(dP.data(), k * k);
  };

  OdeSettings ode;
  ode.rtol = 1e-9;
  ode.atol = 1e-12;
  ode.h_init = 1e-4;
  ode.h_max = st.t_max;

  bool settled = false;
  std::vector<std::pair<double, double>> history;
  auto observer = [&](double t, Vector& v, double) -> bool {
    Matrix P = Eigen::Map<const Matrix>(v.data(), k, k);
    P = 0.5 * (P + P.transpose());
    Eigen::Map<Matrix>(v.data(), k, k) = P;
    const double rate = inf_norm(dre_rhs(P));
    if (history.empty() || t > 2.0 * history.back().first) history.emplace_back(t, rate);
    if (rate <= st.stop_tol * (1.0 + inf_norm(P))) {
      settled = true;
      return false;
    }
    return true;
  };
  const OdeStatus status = integrate_rk45(f, 0.0, st.t_max, y, ode, observer);

  LqrSolution sol;
  sol.P = Eigen::Map<const Matrix>(y.data(), k, k);
  sol.P = 0.5 * (sol.P + sol.P.transpose());
  sol.K = rllt.solve(B.transpose() * sol.P);

  // Newton polish (Kleinman iteration) once the integration is near the fixed
  // point; quadratic convergence takes the residual to machine precision.
  if (k <= st.refine_max_dim) {
    for (int it = 0; it < 20; ++it) {
      const Matrix Acl = A - B * sol.K;
      if (spectral_abscissa(Acl) >= 0.0) break;
      const Matrix C = Q + sol.K.transpose() * R * sol.K;
      const Matrix Pn = solve_lyapunov(Acl, C);
      const double change = inf_norm(Matrix(Pn - sol.P));
      sol.P = Pn;
      sol.K = rllt.solve(B.transpose() * sol.P);
      if (change <= 1e-14 * (1.0 + inf_norm(sol.P))) break;
    }
  } else if (!settled) {
    std::ostringstream oss;
    oss << "solve_riccati: integration did not settle (status: " << status.message << "); history:";
    for (auto& [t, r] : history) oss << " (t=" << t << ", rate=" << r << ")";
    throw std::runtime_error(oss.str());
  }

  sol.riccati_residual = inf_norm(riccati_residual_matrix(A, B, Q, R, sol.P));
  sol.closed_loop_abscissa = spectral_abscissa(A - B * sol.K);

  if (sol.closed_loop_abscissa >= 0.0)
    throw std::runtime_error("solve_riccati: closed loop not Hurwitz (abscissa " +
                             std::to_string(sol.closed_loop_abscissa) + ")");
  if (sol.riccati_residual > st.residual_scale * (1.0 + inf_norm(Q))) {
    std::ostringstream oss;
    oss << "solve_riccati: residual " << sol.riccati_residual << " exceeds tolerance; history:";
    for (auto& [t, r] : history) oss << " (t=" << t << ", rate=" << r << ")";
    throw std::runtime_error(oss.str());
  }

  sol.T = Matrix::Identity(k, k);
  sol.P_full = sol.P;
  sol.K_full = sol.K;
  return sol;
}

LqrSolution lqr_for_model(const DynamicsModel& model, const RiccatiSettings& settings) {
  const EquilibriumPair& eq = model.equilibrium();
  const SystemLinearization lin = model.linearize(eq.x_f, eq.u_f);
  const Matrix T = model.lqr_basis();
  const Matrix A = T.transpose() * lin.A * T;
  const Matrix B = T.transpose() * lin.B;
  const Matrix Q = T.transpose() * model.lqr_state_weight() * T;
  const Matrix R = model.cost_quadratic().R;

  LqrSolution sol = solve_riccati(A, B, 0.5 * (Q + Q.transpose()), R, settings);
  sol.T = T;
  sol.P_full = T * sol.P * T.transpose();
  sol.K_full = sol.K * T.transpose();
  return sol;
}

}  // namespace qrnet
