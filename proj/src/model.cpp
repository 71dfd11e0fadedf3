#include "qrnet/model.hpp"

#include <cmath>

namespace qrnet {

namespace {

double fd_step(double x) { return 1e-6 * (1.0 + std::abs(x)); }

}  // namespace

SystemLinearization DynamicsModel::linearize(const Vector& x, const Vector& u) const {
  const int n = state_dim();
  const int m = control_dim();
  require(x.size() == n && u.size() == m, "linearize: dimension mismatch");
  SystemLinearization lin;
  lin.A.resize(n, n);
  lin.B.resize(n, m);
  Vector xp = x, xm = x, up = u, um = u;
  for (int j = 0; j < n; ++j) {
    const double h = fd_step(x[j]);
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    lin.A.col(j) = (rhs(xp, u) - rhs(xm, u)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  for (int j = 0; j < m; ++j) {
    const double h = fd_step(u[j]);
    up[j] = u[j] + h;
    um[j] = u[j] - h;
    lin.B.col(j) = (rhs(x, up) - rhs(x, um)) / (2.0 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
  require(all_finite(lin.A) && all_finite(lin.B), "linearize: non-finite Jacobian entries");
  return lin;
}

Matrix DynamicsModel::control_jacobian(const Vector& x) const {
  const int m = control_dim();
  const Vector& uf = equilibrium().u_f;
  Matrix B(state_dim(), m);
  Vector up = uf, um = uf;
  for (int j = 0; j < m; ++j) {
    const double h = fd_step(uf[j]);
    up[j] = uf[j] + h;
    um[j] = uf[j] - h;
    B.col(j) = (rhs(x, up) - rhs(x, um)) / (2.0 * h);
    up[j] = uf[j];
    um[j] = uf[j];
  }
  return B;
}

Vector DynamicsModel::cost_state_gradient(const Vector& x, const Vector& u) const {
  const int n = state_dim();
  Vector g(n);
  Vector xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    const double h = fd_step(x[j]);
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    g[j] = (running_cost(xp, u) - running_cost(xm, u)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

std::vector<int> DynamicsModel::regulated() const {
  std::vector<int> idx(state_dim());
  for (int i = 0; i < state_dim(); ++i) idx[i] = i;
  return idx;
}

Matrix DynamicsModel::lqr_basis() const { return Matrix::Identity(state_dim(), state_dim()); }

double DynamicsModel::state_error(const Vector& x) const {
  Vector d = x - equilibrium().x_f;
  return masked_norm2(d, regulated());
}

double DynamicsModel::residual_inf_norm(const Vector& x, const Vector& u) const {
  return masked_inf_norm(rhs(x, u), regulated());
}

Eigen::Vector4d quaternion_from_euler(double yaw, double pitch, double roll) {
  const double cy = std::cos(0.5 * yaw), sy = std::sin(0.5 * yaw);
  const double cp = std::cos(0.5 * pitch), sp = std::sin(0.5 * pitch);
  const double cr = std::cos(0.5 * roll), sr = std::sin(0.5 * roll);
  Eigen::Vector4d q;
  q[0] = cy * cp * cr + sy * sp * sr;
  q[1] = cy * cp * sr - sy * sp * cr;
  q[2] = cy * sp * cr + sy * cp * sr;
  q[3] = sy * cp * cr - cy * sp * sr;
  if (q[0] < 0.0) q = -q;
  q.normalize();
  return q;
}

std::vector<Vector> sample_initial_conditions(const DynamicsModel& model, const SamplingDomain& domain,
                                              int count, std::uint64_t seed) {
  require(count >= 0, "sample_initial_conditions: negative count");
  std::vector<Vector> out;
  out.reserve(count);
  Rng rng(seed);
  const Vector& xf = model.equilibrium().x_f;
  const int n = model.state_dim();

  if (domain.kind == SamplingDomain::Kind::Sphere) {
    require(domain.radius > 0.0, "sample_initial_conditions: radius must be positive");
    for (int i = 0; i < count; ++i) {
      Vector v(n);
      double nrm = 0.0;
      do {
        for (int j = 0; j < n; ++j) v[j] = rng.uniform(-1.0, 1.0);
        nrm = v.norm();
      } while (nrm < 1e-12);
      out.push_back(xf + (domain.radius / nrm) * v);
    }
    return out;
  }

  // UAV start box (positions other than altitude start at zero).
  require(n == 13, "sample_initial_conditions: UavBox domain requires a 13-state model");
  const double s = domain.scale;
  const double deg = M_PI / 180.0;
  const double h_ceil = 50.0;
  for (int i = 0; i < count; ++i) {
    Vector x = Vector::Zero(13);
    x[2] = xf[2] + rng.uniform(-3.0 * h_ceil * s, 3.0 * h_ceil * s);
    for (int j = 0; j < 3; ++j) x[3 + j] = xf[3 + j] + rng.uniform(-5.0 * s, 5.0 * s);
    const double yaw = rng.uniform(-180.0 * deg * s, 180.0 * deg * s);
    const double pitch = rng.uniform(-90.0 * deg * s, 90.0 * deg * s);
    const double roll = rng.uniform(-180.0 * deg * s, 180.0 * deg * s);
    x.segment<4>(6) = quaternion_from_euler(yaw, pitch, roll);
    for (int j = 0; j < 3; ++j) x[10 + j] = rng.uniform(-30.0 * deg * s, 30.0 * deg * s);
    out.push_back(x);
  }
  return out;
}

}  // namespace qrnet
