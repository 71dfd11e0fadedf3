#include "qrnet/uav.hpp"

#include <cmath>

namespace qrnet {

void UavParams::validate() const {
  require(mass > 0.0 && S > 0.0 && b > 0.0 && c > 0.0 && rho > 0.0, "UavParams: nonpositive geometry");
  require(R_prop > 0.0 && k_motor > 0.0, "UavParams: nonpositive propeller parameters");
  require((inertia - inertia.transpose()).cwiseAbs().maxCoeff() < 1e-12, "UavParams: inertia not symmetric");
  Eigen::LLT<Eigen::Matrix3d> llt(inertia);
  require(llt.info() == Eigen::Success, "UavParams: inertia not positive definite");
  require(alpha_stall > 0.0 && alpha_stall < M_PI / 2.0, "UavParams: alpha_stall out of (0, pi/2)");
  require(deltaa_max > 0.0 && deltae_max > 0.0 && deltar_max > 0.0, "UavParams: control limits");
}

namespace uav {

Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q) {
  const double q0 = q[0], q1 = q[1], q2 = q[2], q3 = q[3];
  Eigen::Matrix3d R;
  R << q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3, 2.0 * (q1 * q2 + q0 * q3), 2.0 * (q1 * q3 - q0 * q2),
      2.0 * (q1 * q2 - q0 * q3), q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3, 2.0 * (q2 * q3 + q0 * q1),
      2.0 * (q1 * q3 + q0 * q2), 2.0 * (q2 * q3 - q0 * q1), q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3;
  return R;
}

Eigen::Vector4d quat_kinematics(const Eigen::Vector4d& q, const Eigen::Vector3d& omega) {
  const double p = omega[0], qq = omega[1], r = omega[2];
  Eigen::Matrix4d Omega;
  Omega << 0.0, -p, -qq, -r,
           p, 0.0, r, -qq,
           qq, -r, 0.0, p,
           r, qq, -p, 0.0;
  return 0.5 * Omega * q;
}

namespace {

double stall_blend(const UavParams& prm, double alpha) {
  const double M = prm.blend_rate, a0 = prm.alpha_stall;
  // logistic blend: ~0 below stall, ~1 beyond, exponents clamped for safety
  const double e1 = std::exp(std::clamp(-M * (alpha - a0), -500.0, 500.0));
  const double e2 = std::exp(std::clamp(M * (alpha + a0), -500.0, 500.0));
  return (1.0 + e1 + e2) / ((1.0 + e1) * (1.0 + e2));
}

}  // namespace

AeroCoefficients aero_coefficients(const UavParams& prm, double alpha) {
  require(std::isfinite(alpha), "aero_coefficients: alpha not finite");
  AeroCoefficients out;
  const double sb = stall_blend(prm, alpha);
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const double sgn = (alpha >= 0.0) ? 1.0 : -1.0;
  const double cl_lin = prm.C_L0 + prm.C_Lalpha * alpha;
  out.sigma_b = sb;
  out.C_L = (1.0 - sb) * cl_lin + sb * 2.0 * sgn * sa * sa * ca;
  out.C_D = (1.0 - sb) * (prm.C_D0 + cl_lin * cl_lin / (M_PI * prm.oswald_e * prm.b * prm.b / prm.S)) +
            sb * 2.0 * sa * sa;
  out.C_m = (1.0 - sb) * std::tanh(prm.C_m0 + prm.C_malpha * alpha) + sb * prm.C_m_inf * std::sin(-alpha);
  return out;
}

void forces_moments(const UavParams& prm, const Vector& x, const Vector& u,
                    Eigen::Vector3d& force, Eigen::Vector3d& moment) {
  const Eigen::Vector4d q = x.segment<4>(6);
  const Eigen::Vector3d V = x.segment<3>(3);
  const Eigen::Vector3d omega = x.segment<3>(10);
  const double delta_t = u[0], delta_a = u[1], delta_e = u[2], delta_r = u[3];

  const Eigen::Matrix3d R = rotation_matrix(q);
  force = R * Eigen::Vector3d(0.0, 0.0, prm.mass * prm.gravity);

  const double Vn = V.norm();
  const double prop_gain = 0.5 * prm.rho * M_PI * prm.R_prop * prm.R_prop * prm.C_prop;
  force[0] += prop_gain * (prm.k_motor * prm.k_motor * delta_t - Vn * Vn);

  // low-airspeed guard for the rate terms and sideslip
  const double Vreg = std::max(Vn, 1.0);
  const double alpha = std::atan2(V[2], V[0]);
  const double beta = std::asin(std::clamp(V[1] / Vreg, -1.0, 1.0));
  const double qbar = 0.5 * prm.rho * Vn * Vn * prm.S;
  const double pr = omega[0], qr = omega[1], rr = omega[2];

  const AeroCoefficients c = aero_coefficients(prm, alpha);
  const double FL = qbar * (c.C_L + prm.C_Lq * prm.c / (2.0 * Vreg) * qr + prm.C_Ldeltae * delta_e);
  const double FD = qbar * (c.C_D + prm.C_Dq * prm.c / (2.0 * Vreg) * qr + prm.C_Ddeltae * delta_e);
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  force[0] += ca * (-FD) - sa * (-FL);
  force[2] += sa * (-FD) + ca * (-FL);

  const double bspan = prm.b;
  force[1] += qbar * (prm.C_Y0 + prm.C_Ybeta * beta + prm.C_Yp * bspan / (2.0 * Vreg) * pr +
                      prm.C_Yr * bspan / (2.0 * Vreg) * rr + prm.C_Ydeltaa * delta_a +
                      prm.C_Ydeltar * delta_r);

  moment[0] = qbar * bspan *
              (prm.C_l0 + prm.C_lbeta * beta + prm.C_lp * bspan / (2.0 * Vreg) * pr +
               prm.C_lr * bspan / (2.0 * Vreg) * rr + prm.C_ldeltaa * delta_a + prm.C_ldeltar * delta_r);
  moment[1] = qbar * prm.c *
              (c.C_m + prm.C_mq * prm.c / (2.0 * Vreg) * qr + prm.C_mdeltae * delta_e);
  moment[2] = qbar * bspan *
              (prm.C_n0 + prm.C_nbeta * beta + prm.C_np * bspan / (2.0 * Vreg) * pr +
               prm.C_nr * bspan / (2.0 * Vreg) * rr + prm.C_ndeltaa * delta_a + prm.C_ndeltar * delta_r);
}

Vector rhs(const UavParams& prm, const Vector& x, const Vector& u) {
  require(x.size() == kStateDim && u.size() == kControlDim, "uav rhs: dimension mismatch");
  require(all_finite(x) && all_finite(u), "uav rhs: non-finite input");
  const Eigen::Vector4d q = x.segment<4>(6);
  // simulation states are renormalized each step; optimizer iterates may
  // wander a little, so only reject clearly unphysical attitudes
  require(q.norm() > 0.5 && q.norm() < 2.0, "uav rhs: quaternion norm out of tolerance");

  const Eigen::Vector3d V = x.segment<3>(3);
  const Eigen::Vector3d omega = x.segment<3>(10);

  Eigen::Vector3d F, M;
  forces_moments(prm, x, u, F, M);

  Vector dx(kStateDim);
  dx.segment<3>(0) = uav::rotation_matrix(q).transpose() * V;
  dx.segment<3>(3) = -omega.cross(V) + F / prm.mass;
  dx.segment<4>(6) = quat_kinematics(q, omega);
  dx.segment<3>(10) = prm.inertia.ldlt().solve(-omega.cross(prm.inertia * omega) + M);
  return dx;
}

}  // namespace uav

EquilibriumPair compute_trim(const UavParams& prm, double airspeed) {
  require(airspeed > 0.0 && airspeed < 3.0 * prm.k_motor, "compute_trim: airspeed out of envelope");
  prm.validate();

  // Unknowns: angle of attack (= pitch for level flight), throttle, elevator.
  // Residuals: body x/z force balance and pitch moment balance.
  auto assemble = [&](double alpha, double dt, double de) {
    Vector x = Vector::Zero(uav::kStateDim);
    x[3] = airspeed * std::cos(alpha);
    x[5] = airspeed * std::sin(alpha);
    x.segment<4>(6) = quaternion_from_euler(0.0, alpha, 0.0);
    Vector u = Vector::Zero(uav::kControlDim);
    u[0] = dt;
    u[2] = de;
    return std::make_pair(x, u);
  };
  auto residual = [&](const Eigen::Vector3d& z) {
    auto [x, u] = assemble(z[0], z[1], z[2]);
    const Vector f = uav::rhs(prm, x, u);
    return Eigen::Vector3d(f[3], f[5], f[11]);
  };

  Eigen::Vector3d z(0.05, 0.5, -0.1);
  Eigen::Vector3d res = residual(z);
  int iter = 0;
  for (; iter < 100 && res.lpNorm<Eigen::Infinity>() > 1e-12; ++iter) {
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-7 * (1.0 + std::abs(z[j]));
      Eigen::Vector3d zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      J.col(j) = (residual(zp) - residual(zm)) / (2.0 * h);
    }
    const Eigen::Vector3d step = J.fullPivLu().solve(-res);
    double s = 1.0;
    for (int k = 0; k < 40; ++k) {
      const Eigen::Vector3d cand = z + s * step;
      const Eigen::Vector3d cres = residual(cand);
      if (cres.lpNorm<Eigen::Infinity>() < res.lpNorm<Eigen::Infinity>() || s < 1e-8) {
        z = cand;
        res = cres;
        break;
      }
      s *= 0.5;
    }
  }

  auto [x_f, u_f] = assemble(z[0], z[1], z[2]);
  const Vector f = uav::rhs(prm, x_f, u_f);
  double masked = 0.0;
  for (int i = 2; i < uav::kStateDim; ++i) masked = std::max(masked, std::abs(f[i]));
  if (masked > 1e-8 * (1.0 + inf_norm(x_f)))
    throw std::runtime_error("compute_trim: trim residual " + std::to_string(masked) +
                             " after " + std::to_string(iter) + " iterations");

  require(u_f[0] > 1e-6 && u_f[0] < 1.0 - 1e-6, "compute_trim: throttle at a bound");
  require(std::abs(u_f[2]) < prm.deltae_max - 1e-6, "compute_trim: elevator at a bound");
  return EquilibriumPair{x_f, u_f};
}

UavModel::UavModel(UavParams params, double airspeed)
    : params_(std::move(params)), airspeed_(airspeed) {
  params_.validate();
  eq_ = compute_trim(params_, airspeed_);

  Vector lo(4), hi(4);
  lo << 0.0, -params_.deltaa_max, -params_.deltae_max, -params_.deltar_max;
  hi << 1.0, params_.deltaa_max, params_.deltae_max, params_.deltar_max;
  bounds_ = ControlBounds::box(lo, hi);
  bounds_.validate(eq_.u_f);

  Q_h_ = 1.0 / (h_ceil_ * h_ceil_);
  Q_V_ = Eigen::Vector3d(10.0 / (airspeed_ * airspeed_), 1.0, 1.0).asDiagonal();
  Q_q_ = 5.0 * Eigen::Matrix3d::Identity();
  const double w30 = M_PI / 6.0;
  Q_omega_ = (1.0 / (w30 * w30)) * Eigen::Matrix3d::Identity();
  R_diag_ << 0.1, 0.1 / (params_.deltaa_max * params_.deltaa_max),
      1.0 / (params_.deltae_max * params_.deltae_max),
      1.0 / (params_.deltar_max * params_.deltar_max);

  // LQR design subspace: drop p_n/p_e, then remove the quaternion-norm
  // direction (an exact uncontrollable neutral mode: ||q|| is conserved for
  // any control, so no stabilizing Riccati solution exists across it).
  Matrix S = Matrix::Zero(13, 11);
  for (int i = 0; i < 11; ++i) S(i + 2, i) = 1.0;
  Vector v = Vector::Zero(11);
  v.segment<4>(4) = eq_.x_f.segment<4>(6);  // unit quaternion
  Eigen::HouseholderQR<Matrix> qr(v);
  Matrix Qfull = qr.householderQ();
  lqr_basis_ = S * Qfull.rightCols(10);
}

Vector UavModel::rhs(const Vector& x, const Vector& u) const { return uav::rhs(params_, x, u); }

double UavModel::running_cost(const Vector& x, const Vector& u) const {
  require(x.size() == 13 && u.size() == 4, "uav cost: dimension mismatch");
  require(all_finite(x) && all_finite(u), "uav cost: non-finite input");
  const double dh = x[2] - eq_.x_f[2];
  const double alt = h_ceil_ * std::tanh(dh / h_ceil_);
  const Eigen::Vector3d dV = x.segment<3>(3) - eq_.x_f.segment<3>(3);
  const Eigen::Vector3d dqv = x.segment<3>(7) - eq_.x_f.segment<3>(7);
  const Eigen::Vector3d dw = x.segment<3>(10) - eq_.x_f.segment<3>(10);
  const Eigen::Vector4d du = (u - eq_.u_f).head<4>();
  return Q_h_ * alt * alt + dV.dot(Q_V_ * dV) + dqv.dot(Q_q_ * dqv) + dw.dot(Q_omega_ * dw) +
         du.dot(R_diag_.asDiagonal() * du);
}

CostQuadratic UavModel::cost_quadratic() const {
  CostQuadratic c;
  Vector qd = Vector::Zero(13);
  qd[2] = Q_h_;
  qd.segment<3>(3) = Q_V_.diagonal();
  qd.segment<3>(7) = Q_q_.diagonal();
  qd.segment<3>(10) = Q_omega_.diagonal();
  c.Q = qd.asDiagonal();
  c.R = Matrix(R_diag_.asDiagonal());
  return c;
}

Matrix UavModel::lqr_state_weight() const {
  Matrix Q = cost_quadratic().Q;
  Q(6, 6) += 1e-6;  // q0 deviation, unpenalized by the running cost
  return Q;
}

Matrix UavModel::control_jacobian(const Vector& x) const {
  // f is affine in the controls; assemble df/du analytically.
  const Eigen::Vector3d V = x.segment<3>(3);
  const double Vn = V.norm();
  const double Vreg = std::max(Vn, 1.0);
  const double alpha = std::atan2(V[2], V[0]);
  const double qbar = 0.5 * params_.rho * Vn * Vn * params_.S;
  const double sa = std::sin(alpha), ca = std::cos(alpha);

  Eigen::Matrix<double, 3, 4> dF = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix<double, 3, 4> dM = Eigen::Matrix<double, 3, 4>::Zero();

  const double prop_gain = 0.5 * params_.rho * M_PI * params_.R_prop * params_.R_prop * params_.C_prop;
  dF(0, 0) = prop_gain * params_.k_motor * params_.k_motor;

  // elevator: lift/drag increments rotated into body axes, pitch moment
  const double dFL = qbar * params_.C_Ldeltae;
  const double dFD = qbar * params_.C_Ddeltae;
  dF(0, 2) = ca * (-dFD) - sa * (-dFL);
  dF(2, 2) = sa * (-dFD) + ca * (-dFL);
  dM(1, 2) = qbar * params_.c * params_.C_mdeltae;

  // aileron / rudder: side force and roll/yaw moments
  dF(1, 1) = qbar * params_.C_Ydeltaa;
  dF(1, 3) = qbar * params_.C_Ydeltar;
  dM(0, 1) = qbar * params_.b * params_.C_ldeltaa;
  dM(0, 3) = qbar * params_.b * params_.C_ldeltar;
  dM(2, 1) = qbar * params_.b * params_.C_ndeltaa;
  dM(2, 3) = qbar * params_.b * params_.C_ndeltar;

  Matrix B = Matrix::Zero(13, 4);
  B.block<3, 4>(3, 0) = dF / params_.mass;
  B.block<3, 4>(10, 0) = params_.inertia.ldlt().solve(Matrix(dM));
  return B;
}

Vector UavModel::cost_state_gradient(const Vector& x, const Vector&) const {
  Vector g = Vector::Zero(13);
  const double dh = x[2] - eq_.x_f[2];
  const double th = std::tanh(dh / h_ceil_);
  g[2] = Q_h_ * 2.0 * (h_ceil_ * th) * (1.0 - th * th);
  g.segment<3>(3) = 2.0 * Q_V_ * (x.segment<3>(3) - eq_.x_f.segment<3>(3));
  g.segment<3>(7) = 2.0 * Q_q_ * (x.segment<3>(7) - eq_.x_f.segment<3>(7));
  g.segment<3>(10) = 2.0 * Q_omega_ * (x.segment<3>(10) - eq_.x_f.segment<3>(10));
  return g;
}

std::vector<int> UavModel::regulated() const {
  std::vector<int> idx;
  for (int i = 2; i < 13; ++i) idx.push_back(i);
  return idx;
}

void UavModel::normalize_state(Vector& x) const {
  const double n = x.segment<4>(6).norm();
  if (n > 0.0) x.segment<4>(6) /= n;
}

}  // namespace qrnet
