#include "qrnet/ocp.hpp"

#include <Eigen/Sparse>

#include <atomic>
#include <cmath>
#include <thread>

namespace qrnet {

double hamiltonian(const DynamicsModel& model, const Vector& x, const Vector& lambda, const Vector& u) {
  require(lambda.size() == model.state_dim(), "hamiltonian: costate dimension mismatch");
  return model.running_cost(x, u) + lambda.dot(model.rhs(x, u));
}

Vector minimize_hamiltonian(const DynamicsModel& model, const Vector& x, const Vector& lambda) {
  require(lambda.size() == model.state_dim(), "minimize_hamiltonian: dimension mismatch");
  const Matrix B = model.control_jacobian(x);
  const Matrix R = model.cost_quadratic().R;
  const Vector u = model.equilibrium().u_f - 0.5 * R.llt().solve(B.transpose() * lambda);
  return model.bounds().clip(u);
}

void pmp_rhs(const DynamicsModel& model, const Vector& x, const Vector& lambda, Vector& dx,
             Vector& dlam) {
  const Vector u = minimize_hamiltonian(model, x, lambda);
  const SystemLinearization lin = model.linearize(x, u);
  dx = model.rhs(x, u);
  dlam = -model.cost_state_gradient(x, u) - lin.A.transpose() * lambda;
}

namespace {

// ---------------------------------------------------------------------------
// indirect path: Hermite-Simpson collocation of the characteristic system
// ---------------------------------------------------------------------------

struct IndirectProblem {
  const DynamicsModel& model;
  int n;

  Vector F(const Vector& y) const {
    const Vector x = y.head(n);
    const Vector lam = y.tail(n);
    Vector dx, dlam, out(2 * n);
    pmp_rhs(model, x, lam, dx, dlam);
    out << dx, dlam;
    return out;
  }

  Matrix Fy(const Vector& y) const {
    const int d = 2 * n;
    Matrix J(d, d);
    Vector yp = y, ym = y;
    for (int j = 0; j < d; ++j) {
      const double h = 1e-7 * (1.0 + std::abs(y[j]));
      yp[j] = y[j] + h;
      ym[j] = y[j] - h;
      J.col(j) = (F(yp) - F(ym)) / (2.0 * h);
      yp[j] = y[j];
      ym[j] = y[j];
    }
    return J;
  }
};

struct BvpResult {
  bool ok = false;
  std::vector<Vector> y;  // nodes, each 2n
  double residual = 0.0;
  std::string reason;
};

// Residual of the collocation system: x(0) boundary rows, Hermite-Simpson
// defects per interval, lambda(T) boundary rows.
Vector bvp_residual(const IndirectProblem& prob, const std::vector<Vector>& y, const Vector& x0,
                    double h, std::vector<Vector>* fnodes_out = nullptr) {
  const int n = prob.n;
  const int d = 2 * n;
  const int N = static_cast<int>(y.size());
  Vector res(d * N);
  res.head(n) = y[0].head(n) - x0;

  std::vector<Vector> f(N);
  for (int k = 0; k < N; ++k) f[k] = prob.F(y[k]);
  for (int k = 0; k + 1 < N; ++k) {
    const Vector ym = 0.5 * (y[k] + y[k + 1]) + (h / 8.0) * (f[k] - f[k + 1]);
    const Vector fm = prob.F(ym);
    res.segment(n + k * d, d) = y[k + 1] - y[k] - (h / 6.0) * (f[k] + 4.0 * fm + f[k + 1]);
  }
  res.tail(n) = y[N - 1].tail(n);
  if (fnodes_out) *fnodes_out = std::move(f);
  return res;
}

BvpResult solve_bvp(const IndirectProblem& prob, const Vector& x0, std::vector<Vector> y, double T,
                    const IndirectSettings& st) {
  const int n = prob.n;
  const int d = 2 * n;
  const int N = static_cast<int>(y.size());
  const double h = T / (N - 1);
  const double tol = st.newton_tol * (1.0 + inf_norm(x0));

  BvpResult out;
  Vector res = bvp_residual(prob, y, x0, h);
  double rnorm = inf_norm(res);

  using Trip = Eigen::Triplet<double>;
  Eigen::SparseMatrix<double> Jsp(d * N, d * N);
  std::vector<Trip> trips;

  for (int iter = 0; iter < st.newton_max_iters; ++iter) {
    if (rnorm <= tol) {
      out.ok = true;
      break;
    }

    trips.clear();
    // boundary rows: x-part of y_0, lambda-part of y_{N-1}
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
    for (int i = 0; i < n; ++i) trips.emplace_back(n + (N - 1) * d + i, (N - 1) * d + n + i, 1.0);

    std::vector<Matrix> Fys(N);
    for (int k = 0; k < N; ++k) Fys[k] = prob.Fy(y[k]);
    for (int k = 0; k + 1 < N; ++k) {
      const Vector fk = prob.F(y[k]);
      const Vector fk1 = prob.F(y[k + 1]);
      const Vector ym = 0.5 * (y[k] + y[k + 1]) + (h / 8.0) * (fk - fk1);
      const Matrix Fym = prob.Fy(ym);
      const Matrix dmk = 0.5 * Matrix::Identity(d, d) + (h / 8.0) * Fys[k];
      const Matrix dmk1 = 0.5 * Matrix::Identity(d, d) - (h / 8.0) * Fys[k + 1];
      const Matrix Jk = -Matrix::Identity(d, d) - (h / 6.0) * (Fys[k] + 4.0 * Fym * dmk);
      const Matrix Jk1 = Matrix::Identity(d, d) - (h / 6.0) * (Fys[k + 1] + 4.0 * Fym * dmk1);
      const int row0 = n + k * d;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          if (Jk(i, j) != 0.0) trips.emplace_back(row0 + i, k * d + j, Jk(i, j));
          if (Jk1(i, j) != 0.0) trips.emplace_back(row0 + i, (k + 1) * d + j, Jk1(i, j));
        }
      }
    }
    Jsp.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Jsp);
    if (lu.info() != Eigen::Success) {
      out.reason = "newton: singular collocation Jacobian";
      out.residual = rnorm;
      return out;
    }
    const Vector step = lu.solve(-res);

    double s = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= st.max_damping_halvings; ++halving) {
      std::vector<Vector> cand(N);
      for (int k = 0; k < N; ++k) cand[k] = y[k] + s * step.segment(k * d, d);
      Vector cres;
      try {
        cres = bvp_residual(prob, cand, x0, h);
      } catch (const std::exception&) {
        s *= 0.5;
        continue;
      }
      const double cnorm = inf_norm(cres);
      if (cnorm < (1.0 - 0.25 * s) * rnorm || cnorm <= tol) {
        y = std::move(cand);
        res = std::move(cres);
        rnorm = cnorm;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) {
      out.reason = "newton: line search stalled at max damping";
      out.residual = rnorm;
      return out;
    }
  }

  out.residual = rnorm;
  if (rnorm <= tol) out.ok = true;
  if (!out.ok && out.reason.empty()) out.reason = "newton: max iterations";
  out.y = std::move(y);
  return out;
}

std::vector<Vector> initial_guess_indirect(const DynamicsModel& model, const Vector& x0,
                                           const LqrSolution& lqr, int N) {
  const Vector& xf = model.equilibrium().x_f;
  const int n = model.state_dim();
  std::vector<Vector> y(N, Vector(2 * n));
  for (int k = 0; k < N; ++k) {
    const double s = (N == 1) ? 1.0 : static_cast<double>(k) / (N - 1);
    Vector x = (1.0 - s) * x0 + s * xf;
    model.normalize_state(x);
    y[k].head(n) = x;
    y[k].tail(n) = 2.0 * lqr.P_full * (x - xf);
  }
  return y;
}

std::vector<Vector> refine_nodes(const std::vector<Vector>& y) {
  std::vector<Vector> out;
  out.reserve(2 * y.size() - 1);
  for (std::size_t k = 0; k + 1 < y.size(); ++k) {
    out.push_back(y[k]);
    out.push_back(0.5 * (y[k] + y[k + 1]));
  }
  out.push_back(y.back());
  return out;
}

std::vector<Vector> extend_horizon_guess(const std::vector<Vector>& y, const DynamicsModel& model,
                                         const LqrSolution& lqr) {
  // previous solution covers the first half of the doubled horizon; decay the
  // tail toward the equilibrium
  const int n = model.state_dim();
  const Vector& xf = model.equilibrium().x_f;
  const int N = static_cast<int>(y.size());
  std::vector<Vector> out(N, Vector(2 * n));
  for (int k = 0; k < N; ++k) {
    const double pos = static_cast<double>(k) / (N - 1) * 2.0;  // in units of the old horizon
    if (pos <= 1.0) {
      const double idx = pos * (N - 1);
      const int lo = std::min(static_cast<int>(idx), N - 2);
      const double w = idx - lo;
      out[k] = (1.0 - w) * y[lo] + w * y[lo + 1];
    } else {
      const double s = pos - 1.0;  // 0..1 on the tail
      Vector x = (1.0 - s) * y.back().head(n) + s * xf;
      model.normalize_state(x);
      out[k].head(n) = x;
      out[k].tail(n) = 2.0 * lqr.P_full * (x - xf);
    }
  }
  return out;
}

double hs_cost(const DynamicsModel& model, const std::vector<Vector>& x, const std::vector<Vector>& u,
               double h) {
  // Simpson quadrature of L with Hermite midpoint states and averaged controls
  double J = 0.0;
  const int N = static_cast<int>(x.size());
  for (int k = 0; k + 1 < N; ++k) {
    const Vector fk = model.rhs(x[k], u[k]);
    const Vector fk1 = model.rhs(x[k + 1], u[k + 1]);
    const Vector xm = 0.5 * (x[k] + x[k + 1]) + (h / 8.0) * (fk - fk1);
    const Vector um = 0.5 * (u[k] + u[k + 1]);
    J += (h / 6.0) * (model.running_cost(x[k], u[k]) + 4.0 * model.running_cost(xm, um) +
                      model.running_cost(x[k + 1], u[k + 1]));
  }
  return J;
}

}  // namespace

ExtremalTrajectory solve_open_loop_indirect(const DynamicsModel& model, const Vector& x0,
                                            const IndirectSettings& st, const LqrSolution& lqr) {
  require(all_finite(x0) && x0.size() == model.state_dim(), "indirect: bad initial state");
  const int n = model.state_dim();
  IndirectProblem prob{model, n};
  const Vector& xf = model.equilibrium().x_f;
  const double x0err = (x0 - xf).norm();

  ExtremalTrajectory traj;
  double T = st.horizon_init;
  int N = st.mesh_nodes;
  std::vector<Vector> guess = initial_guess_indirect(model, x0, lqr, N);
  double prev_cost = std::numeric_limits<double>::quiet_NaN();

  for (int doubling = 0; doubling <= st.max_horizon_doublings; ++doubling) {
    BvpResult sol;
    bool accuracy_ok = false;
    double Hdrift = 0.0, Habs = 0.0;
    while (true) {
      sol = solve_bvp(prob, x0, guess, T, st);
      if (!sol.ok) {
        if (N * 2 - 1 <= st.max_mesh_nodes) {
          guess = refine_nodes(sol.y.empty() ? guess : sol.y);
          N = static_cast<int>(guess.size());
          continue;
        }
        traj.converged = false;
        traj.residual = sol.residual;
        traj.failure_reason = sol.reason + " (T=" + std::to_string(T) + ")";
        return traj;
      }
      // Hamiltonian constancy along the discrete solution
      double H0 = 0.0;
      Hdrift = 0.0;
      Habs = 0.0;
      for (int k = 0; k < N; ++k) {
        const Vector x = sol.y[k].head(n);
        const Vector lam = sol.y[k].tail(n);
        const double H = hamiltonian(model, x, lam, minimize_hamiltonian(model, x, lam));
        if (k == 0) H0 = H;
        Hdrift = std::max(Hdrift, std::abs(H - H0));
        Habs = std::max(Habs, std::abs(H));
      }
      if (Hdrift <= st.hamiltonian_tol * (1.0 + std::abs(H0))) {
        accuracy_ok = true;
        break;
      }
      if (N * 2 - 1 > st.max_mesh_nodes) break;
      guess = refine_nodes(sol.y);
      N = static_cast<int>(guess.size());
    }

    const double h = T / (N - 1);
    std::vector<Vector> xs(N), us(N), lams(N);
    for (int k = 0; k < N; ++k) {
      xs[k] = sol.y[k].head(n);
      lams[k] = sol.y[k].tail(n);
      us[k] = minimize_hamiltonian(model, xs[k], lams[k]);
    }
    const double cost = hs_cost(model, xs, us, h);
    const double xT_err = (xs.back() - xf).norm();

    const bool state_ok = xT_err <= st.state_convergence_tol * std::max(x0err, 1e-14);
    const bool cost_ok = std::isfinite(prev_cost) &&
                         std::abs(cost - prev_cost) <= st.cost_change_tol * std::max(std::abs(prev_cost), 1e-12);
    if (accuracy_ok && state_ok && (cost_ok || (doubling > 0 && cost <= 1e-14))) {
      traj.t = Vector::LinSpaced(N, 0.0, T);
      traj.x = std::move(xs);
      traj.lam = std::move(lams);
      traj.u = std::move(us);
      traj.cost = cost;
      traj.converged = true;
      traj.residual = sol.residual;
      traj.hamiltonian_drift = Hdrift;
      traj.hamiltonian_abs = Habs;
      traj.horizon = T;
      return traj;
    }

    prev_cost = cost;
    guess = extend_horizon_guess(sol.y, model, lqr);
    T *= st.horizon_growth;
    if (2 * N - 1 <= st.max_mesh_nodes) {
      guess = refine_nodes(guess);
      N = static_cast<int>(guess.size());
    }
  }

  traj.converged = false;
  traj.failure_reason = "horizon cap reached without convergence";
  return traj;
}

// ---------------------------------------------------------------------------
// direct path: Hermite-Simpson NLP via augmented Lagrangian
// ---------------------------------------------------------------------------

namespace {

struct DirectWork {
  const DynamicsModel& model;
  Vector x0;
  int N;
  double h;
  int n, m;

  int num_vars() const { return (N - 1) * n + N * m; }
  int num_cons() const { return (N - 1) * n; }

  Vector state_at(const Vector& z, int k) const {
    if (k == 0) return x0;
    return z.segment((k - 1) * n, n);
  }
  Vector control_at(const Vector& z, int k) const { return z.segment((N - 1) * n + k * m, m); }

  void project(Vector& z) const {
    const ControlBounds& b = model.bounds();
    if (!b.any_bounded()) return;
    for (int k = 0; k < N; ++k) {
      Vector u = control_at(z, k);
      u = b.clip(u);
      z.segment((N - 1) * n + k * m, m) = u;
    }
  }

  // objective, defects, and (optionally) the gradient of the augmented
  // Lagrangian J + mu'c + rho/2 |c|^2
  double eval(const Vector& z, const Vector& mu, double rho, Vector* grad, Vector* defects,
              double* obj_out) const {
    std::vector<Vector> x(N), u(N), f(N);
    std::vector<Matrix> A(N), B(N);
    const Matrix R = model.cost_quadratic().R;
    const Vector& uf = model.equilibrium().u_f;
    const bool want_grad = grad != nullptr;
    for (int k = 0; k < N; ++k) {
      x[k] = state_at(z, k);
      u[k] = control_at(z, k);
      f[k] = model.rhs(x[k], u[k]);
      if (want_grad) {
        const SystemLinearization lin = model.linearize(x[k], u[k]);
        A[k] = lin.A;
        B[k] = lin.B;
      }
    }
    if (want_grad) grad->setZero(num_vars());
    if (defects) defects->resize(num_cons());

    double J = 0.0, AL = 0.0;
    for (int k = 0; k + 1 < N; ++k) {
      const Vector xm = 0.5 * (x[k] + x[k + 1]) + (h / 8.0) * (f[k] - f[k + 1]);
      const Vector um = 0.5 * (u[k] + u[k + 1]);
      const Vector fm = model.rhs(xm, um);
      const Vector c = x[k] - x[k + 1] + (h / 6.0) * (f[k] + 4.0 * fm + f[k + 1]);
      if (defects) defects->segment(k * n, n) = c;

      const double Lk = model.running_cost(x[k], u[k]);
      const double Lm = model.running_cost(xm, um);
      const double Lk1 = model.running_cost(x[k + 1], u[k + 1]);
      J += (h / 6.0) * (Lk + 4.0 * Lm + Lk1);

      const Vector w = mu.segment(k * n, n) + rho * c;
      AL += mu.segment(k * n, n).dot(c) + 0.5 * rho * c.squaredNorm();

      if (!want_grad) continue;

      SystemLinearization linm = model.linearize(xm, um);
      const Matrix& Am = linm.A;
      const Matrix& Bm = linm.B;
      const Vector Lx_k = model.cost_state_gradient(x[k], u[k]);
      const Vector Lx_m = model.cost_state_gradient(xm, um);
      const Vector Lx_k1 = model.cost_state_gradient(x[k + 1], u[k + 1]);
      const Vector Lu_k = 2.0 * R * (u[k] - uf);
      const Vector Lu_m = 2.0 * R * (um - uf);
      const Vector Lu_k1 = 2.0 * R * (u[k + 1] - uf);

      const Vector gm = (2.0 * h / 3.0) * (Lx_m + Am.transpose() * w);

      const Vector gx_k = (h / 6.0) * (Lx_k + A[k].transpose() * w) +
                          (0.5 * Matrix::Identity(n, n) + (h / 8.0) * A[k]).transpose() * gm + w;
      const Vector gx_k1 = (h / 6.0) * (Lx_k1 + A[k + 1].transpose() * w) +
                           (0.5 * Matrix::Identity(n, n) - (h / 8.0) * A[k + 1]).transpose() * gm - w;
      const Vector gu_k = (h / 6.0) * (Lu_k + B[k].transpose() * w) + (h / 8.0) * B[k].transpose() * gm +
                          (h / 3.0) * (Lu_m + Bm.transpose() * w);
      const Vector gu_k1 = (h / 6.0) * (Lu_k1 + B[k + 1].transpose() * w) -
                           (h / 8.0) * B[k + 1].transpose() * gm + (h / 3.0) * (Lu_m + Bm.transpose() * w);

      if (k >= 1) grad->segment((k - 1) * n, n) += gx_k;
      grad->segment(k * n, n) += gx_k1;
      grad->segment((N - 1) * n + k * m, m) += gu_k;
      grad->segment((N - 1) * n + (k + 1) * m, m) += gu_k1;
    }
    if (obj_out) *obj_out = J;
    return J + AL;
  }
};

// projected L-BFGS for the inner subproblem
struct InnerResult {
  double phi = 0.0;
  double pg_norm = 0.0;
  int iters = 0;
  bool stalled = false;
};

InnerResult inner_minimize(const DirectWork& work, Vector& z, const Vector& mu, double rho,
                           double tol, int max_iters) {
  InnerResult res;
  const int mem = 10;
  std::vector<Vector> S, Y;
  Vector g(work.num_vars());
  double phi = work.eval(z, mu, rho, &g, nullptr, nullptr);

  auto projected_gradient_norm = [&](const Vector& zz, const Vector& gg) {
    Vector step = zz - gg;
    work.project(step);
    return inf_norm(Vector(step - zz));
  };

  for (int it = 0; it < max_iters; ++it) {
    res.pg_norm = projected_gradient_norm(z, g);
    if (res.pg_norm <= tol) break;

    // two-loop recursion
    Vector q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      const double rho_i = 1.0 / Y[i].dot(S[i]);
      alpha[i] = rho_i * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) {
      const double gamma = S.back().dot(Y.back()) / Y.back().dot(Y.back());
      q *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double rho_i = 1.0 / Y[i].dot(S[i]);
      const double beta = rho_i * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Vector d = -q;
    if (d.dot(g) > -1e-14 * d.norm() * g.norm()) d = -g;  // safeguard descent

    double s = 1.0;
    bool accepted = false;
    Vector z_new, g_new;
    double phi_new = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = z + s * d;
      work.project(z_new);
      const Vector dz = z_new - z;
      if (inf_norm(dz) < 1e-16) break;
      phi_new = work.eval(z_new, mu, rho, nullptr, nullptr, nullptr);
      if (std::isfinite(phi_new) && phi_new <= phi + 1e-4 * std::min(g.dot(dz), 0.0)) {
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    g_new.resize(work.num_vars());
    phi_new = work.eval(z_new, mu, rho, &g_new, nullptr, nullptr);

    Vector s_vec = z_new - z;
    Vector y_vec = g_new - g;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      S.push_back(std::move(s_vec));
      Y.push_back(std::move(y_vec));
      if (static_cast<int>(S.size()) > mem) {
        S.erase(S.begin());
        Y.erase(Y.begin());
      }
    }
    z = std::move(z_new);
    g = std::move(g_new);
    phi = phi_new;
    res.iters = it + 1;
  }
  res.phi = phi;
  res.pg_norm = projected_gradient_norm(z, g);
  return res;
}

}  // namespace

ExtremalTrajectory solve_open_loop_direct(const DynamicsModel& model, const Vector& x0,
                                          const DirectSettings& st, const LqrSolution& lqr) {
  require(all_finite(x0) && x0.size() == model.state_dim(), "direct: bad initial state");
  const int n = model.state_dim();
  const int m = model.control_dim();
  const Vector& xf = model.equilibrium().x_f;
  const Vector& uf = model.equilibrium().u_f;
  const double x0err = (x0 - xf).norm();

  ExtremalTrajectory traj;
  double T = st.horizon_init;
  int N = st.mesh_nodes;
  double prev_cost = std::numeric_limits<double>::quiet_NaN();
  Vector z_prev;  // carried across horizon extensions

  for (int doubling = 0; doubling <= st.max_horizon_doublings; ++doubling) {
    DirectWork work{model, x0, N, T / (N - 1), n, m};

    Vector z(work.num_vars());
    if (doubling == 0 || z_prev.size() == 0) {
      // linear state interpolation, LQR feedback controls on those states
      for (int k = 1; k < N; ++k) {
        const double s = static_cast<double>(k) / (N - 1);
        Vector x = (1.0 - s) * x0 + s * xf;
        model.normalize_state(x);
        z.segment((k - 1) * n, n) = x;
      }
      for (int k = 0; k < N; ++k) {
        const Vector x = work.state_at(z, k);
        z.segment((N - 1) * n + k * m, m) = model.bounds().clip(uf - lqr.K_full * (x - xf));
      }
    } else {
      z = z_prev;
    }
    work.project(z);

    Vector mu = Vector::Zero(work.num_cons());
    double rho = st.penalty_init;
    double omega = 1e-2;
    double cmax_prev = std::numeric_limits<double>::infinity();
    Vector defects(work.num_cons());
    bool solved = false;

    for (int outer = 0; outer < st.al_max_outer; ++outer) {
      const InnerResult ir = inner_minimize(work, z, mu, rho, omega, st.inner_max_iters);
      work.eval(z, mu, rho, nullptr, &defects, nullptr);
      const double cmax = inf_norm(defects);
      if (cmax <= st.defect_tol && omega <= st.inner_tol) {
        solved = true;
        break;
      }
      if (cmax <= 0.25 * cmax_prev || cmax <= st.defect_tol) {
        mu += rho * defects;
        omega = std::max(omega * 0.1, st.inner_tol);
        cmax_prev = cmax;
      } else {
        rho *= st.penalty_growth;
      }
      if (ir.stalled && omega <= st.inner_tol && cmax > st.defect_tol * 1e3) {
        // no further progress possible at this penalty level
        rho *= st.penalty_growth;
      }
    }

    double obj = 0.0;
    work.eval(z, mu, rho, nullptr, &defects, &obj);
    const double cmax = inf_norm(defects);
    if (!solved || cmax > st.defect_tol) {
      traj.converged = false;
      traj.residual = cmax;
      traj.failure_reason = "augmented Lagrangian stagnation (defect " + std::to_string(cmax) + ")";
      return traj;
    }

    const Vector xT = work.state_at(z, N - 1);
    const double xT_err = (xT - xf).norm();
    const bool state_ok = xT_err <= st.state_convergence_tol * std::max(x0err, 1e-14);
    const bool cost_ok = std::isfinite(prev_cost) &&
                         std::abs(obj - prev_cost) <= st.cost_change_tol * std::max(std::abs(prev_cost), 1e-12);
    if (state_ok && (cost_ok || (doubling > 0 && obj <= 1e-14))) {
      traj.t = Vector::LinSpaced(N, 0.0, T);
      traj.x.resize(N);
      traj.u.resize(N);
      for (int k = 0; k < N; ++k) {
        traj.x[k] = work.state_at(z, k);
        traj.u[k] = work.control_at(z, k);
      }
      traj.cost = obj;
      traj.converged = true;
      traj.residual = cmax;
      traj.horizon = T;
      return traj;
    }

    // extend: previous solution occupies the first half of the doubled horizon
    prev_cost = obj;
    const int N_new = N;
    Vector z_ext(work.num_vars());
    for (int k = 1; k < N_new; ++k) {
      const double pos = 2.0 * k / (N_new - 1);
      Vector x;
      if (pos <= 1.0) {
        const double idx = pos * (N - 1);
        const int lo = std::min(static_cast<int>(idx), N - 2);
        const double w = idx - lo;
        x = (1.0 - w) * work.state_at(z, lo) + w * work.state_at(z, lo + 1);
      } else {
        const double s = pos - 1.0;
        x = (1.0 - s) * work.state_at(z, N - 1) + s * xf;
      }
      model.normalize_state(x);
      z_ext.segment((k - 1) * n, n) = x;
    }
    for (int k = 0; k < N_new; ++k) {
      const double pos = 2.0 * k / (N_new - 1);
      Vector u;
      if (pos <= 1.0) {
        const double idx = pos * (N - 1);
        const int lo = std::min(static_cast<int>(idx), N - 2);
        const double w = idx - lo;
        u = (1.0 - w) * work.control_at(z, lo) + w * work.control_at(z, lo + 1);
      } else {
        Vector x = (k == 0) ? x0 : Vector(z_ext.segment((k - 1) * n, n));
        u = model.bounds().clip(uf - lqr.K_full * (x - xf));
      }
      z_ext.segment((N_new - 1) * n + k * m, m) = u;
    }
    z_prev = std::move(z_ext);
    T *= st.horizon_growth;
  }

  traj.converged = false;
  traj.failure_reason = "horizon cap reached without convergence";
  return traj;
}

// ---------------------------------------------------------------------------
// dataset assembly
// ---------------------------------------------------------------------------

namespace {

std::vector<int> subsample_indices(int nodes, int max_records) {
  std::vector<int> idx;
  if (nodes <= max_records) {
    idx.resize(nodes);
    for (int i = 0; i < nodes; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(max_records);
  int prev = -1;
  for (int j = 0; j < max_records; ++j) {
    const int i = static_cast<int>(std::llround(static_cast<double>(j) * (nodes - 1) / (max_records - 1)));
    if (i != prev) idx.push_back(i);
    prev = i;
  }
  return idx;
}

}  // namespace

Dataset generate_dataset(const DynamicsModel& model, const DatagenSettings& st, int n_traj,
                         std::uint64_t seed, const LqrSolution& lqr) {
  require(n_traj >= 0, "generate_dataset: negative trajectory count");
  require(st.method == "indirect" || st.method == "direct",
          "generate_dataset: unknown method '" + st.method + "'");

  Dataset ds;
  ds.model_id = model.id();
  ds.method = st.method;
  ds.n_requested = n_traj;
  ds.seed = seed;

  const auto x0s = sample_initial_conditions(model, st.domain, n_traj, derive_seed(seed, "x0"));
  std::vector<ExtremalTrajectory> trajs(n_traj);

  auto solve_one = [&](int i) {
    try {
      if (st.method == "indirect")
        trajs[i] = solve_open_loop_indirect(model, x0s[i], st.indirect, lqr);
      else
        trajs[i] = solve_open_loop_direct(model, x0s[i], st.direct, lqr);
    } catch (const std::exception& e) {
      trajs[i].converged = false;
      trajs[i].failure_reason = e.what();
    }
  };

  const int workers = std::max(1, st.workers);
  if (workers == 1 || n_traj <= 1) {
    for (int i = 0; i < n_traj; ++i) solve_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(workers, n_traj); ++w) {
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < n_traj; i = next.fetch_add(1)) solve_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  double horizon_sum = 0.0;
  for (int i = 0; i < n_traj; ++i) {
    const ExtremalTrajectory& tr = trajs[i];
    if (!tr.converged) {
      ++ds.n_discarded;
      continue;
    }
    ++ds.n_converged;
    horizon_sum += tr.horizon;
    const auto idx = subsample_indices(static_cast<int>(tr.x.size()), st.max_records_per_traj);
    for (int k : idx) {
      DatasetRecord rec;
      rec.x = tr.x[k];
      rec.u = tr.u[k];
      if (tr.has_costates()) rec.lam = tr.lam[k];
      rec.traj_id = i;
      rec.t = tr.t[k];
      ds.records.push_back(std::move(rec));
    }
    ds.values.emplace_back(tr.x.front(), tr.cost);
  }
  if (ds.n_converged > 0) ds.mean_horizon = horizon_sum / ds.n_converged;
  ds.degraded = (n_traj > 0) && (ds.n_converged < 0.9 * n_traj);
  for (const auto& rec : ds.records)
    require(all_finite(rec.x) && all_finite(rec.u) && (rec.lam.size() == 0 || all_finite(rec.lam)),
            "generate_dataset: non-finite record");
  return ds;
}

}  // namespace qrnet
