#pragma once

#include "qrnet/model.hpp"

namespace qrnet {

// Fixed-wing airframe parameters. Values live in a versioned JSON parameter
// file (see configs/aerosonde.json); units are documented in the README.
struct UavParams {
  int schema_version = 1;

  double mass = 11.0;        // kg
  Eigen::Matrix3d inertia;   // kg m^2 (symmetric positive definite)
  double S = 0.55;           // wing area, m^2
  double b = 2.8956;         // wingspan, m
  double c = 0.18994;        // mean chord, m
  double rho = 1.2682;       // air density, kg/m^3
  double gravity = 9.81;     // m/s^2

  // propeller
  double R_prop = 0.254;     // blade length, m
  double C_prop = 0.45;
  double k_motor = 32.0;     // m/s at full throttle

  // longitudinal aero
  double C_L0 = 0.23, C_Lalpha = 5.61, C_Lq = 7.95, C_Ldeltae = 0.13;
  double C_D0 = 0.043, C_Dq = 0.0, C_Ddeltae = 0.0135;
  double oswald_e = 0.9;
  double C_m0 = 0.0135, C_malpha = -2.74, C_mq = -38.21, C_mdeltae = -0.99;
  double C_m_inf = 0.8;          // post-stall pitching-moment amplitude
  double alpha_stall = 0.3490658503988659;  // 20 deg, rad
  double blend_rate = 50.0;      // stall blend sharpness, 1/rad

  // lateral aero (linear-coefficient model)
  double C_Y0 = 0.0, C_Ybeta = -0.83, C_Yp = 0.0, C_Yr = 0.0, C_Ydeltaa = 0.075, C_Ydeltar = 0.19;
  double C_l0 = 0.0, C_lbeta = -0.13, C_lp = -0.51, C_lr = 0.25, C_ldeltaa = 0.17, C_ldeltar = 0.0024;
  double C_n0 = 0.0, C_nbeta = 0.073, C_np = -0.069, C_nr = -0.095, C_ndeltaa = -0.011, C_ndeltar = -0.069;

  // control limits (throttle is [0,1])
  double deltaa_max = 0.7853981633974483;  // rad
  double deltae_max = 0.7853981633974483;
  double deltar_max = 0.7853981633974483;

  UavParams() { inertia << 0.8244, 0.0, -0.1204, 0.0, 1.135, 0.0, -0.1204, 0.0, 1.759; }

  void validate() const;
};

struct AeroCoefficients {
  double C_L;
  double C_D;
  double C_m;
  double sigma_b;  // stall blend in [0, 1]
};

// State layout: x = (p_n, p_e, p_d, u, v, w, q0, q1, q2, q3, p, q, r), 13 entries.
// Controls: u = (delta_t, delta_a, delta_e, delta_r).
namespace uav {
constexpr int kStateDim = 13;
constexpr int kControlDim = 4;

// rotation inertial -> body for a scalar-first quaternion
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q);

// q' = 1/2 Omega(omega) q; Omega is skew-symmetric so ||q|| is conserved
Eigen::Vector4d quat_kinematics(const Eigen::Vector4d& q, const Eigen::Vector3d& omega);

AeroCoefficients aero_coefficients(const UavParams& p, double alpha);

// body-frame external force and moment (gravity + propeller + aerodynamics)
void forces_moments(const UavParams& p, const Vector& x, const Vector& u,
                    Eigen::Vector3d& force, Eigen::Vector3d& moment);

Vector rhs(const UavParams& p, const Vector& x, const Vector& u);

}  // namespace uav

// Straight-and-level trim at the given airspeed: f(x_f, u_f) = 0 on every
// component except the horizontal position rates, yaw = 0, |V_f| = airspeed.
EquilibriumPair compute_trim(const UavParams& params, double airspeed);

class UavModel : public DynamicsModel {
 public:
  UavModel(UavParams params, double airspeed);

  std::string id() const override { return "uav"; }
  int state_dim() const override { return uav::kStateDim; }
  int control_dim() const override { return uav::kControlDim; }
  const EquilibriumPair& equilibrium() const override { return eq_; }
  const ControlBounds& bounds() const override { return bounds_; }

  Vector rhs(const Vector& x, const Vector& u) const override;
  double running_cost(const Vector& x, const Vector& u) const override;
  CostQuadratic cost_quadratic() const override;
  Matrix control_jacobian(const Vector& x) const override;
  Vector cost_state_gradient(const Vector& x, const Vector& u) const override;
  Matrix lqr_state_weight() const override;

  std::vector<int> regulated() const override;  // all but p_n, p_e
  Matrix lqr_basis() const override { return lqr_basis_; }
  void normalize_state(Vector& x) const override;
  bool in_envelope(const Vector& x) const override {
    return std::abs(x[2] - eq_.x_f[2]) <= 300.0;
  }

  const UavParams& params() const { return params_; }
  double airspeed() const { return airspeed_; }
  double h_ceil() const { return h_ceil_; }

  // throttle at which the propeller produces zero thrust for airspeed V
  double zero_thrust_throttle(double V) const {
    return V * V / (params_.k_motor * params_.k_motor);
  }

 private:
  UavParams params_;
  double airspeed_;
  EquilibriumPair eq_;
  ControlBounds bounds_;
  Matrix lqr_basis_;  // 13 x 10, drops p_n/p_e and the quaternion-norm direction

  // cost parameters
  double h_ceil_ = 50.0;
  double Q_h_;
  Eigen::Matrix3d Q_V_, Q_omega_;
  Eigen::Matrix3d Q_q_;
  Eigen::Vector4d R_diag_;
};

}  // namespace qrnet
