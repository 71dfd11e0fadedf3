#pragma once

#include <memory>

#include "qrnet/rng.hpp"
#include "qrnet/types.hpp"

namespace qrnet {

// A controlled vector field x' = f(x, u) with running cost L(x, u) = q(x) + r(u),
// equilibrium pair (x_f, u_f), box control set and linearization access.
// Models are immutable after construction; every member function is pure.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual const EquilibriumPair& equilibrium() const = 0;
  virtual const ControlBounds& bounds() const = 0;

  virtual Vector rhs(const Vector& x, const Vector& u) const = 0;
  virtual double running_cost(const Vector& x, const Vector& u) const = 0;
  virtual CostQuadratic cost_quadratic() const = 0;

  // df/dx and df/du. The default is central finite differences with relative
  // step 1e-6; concrete models override with analytic Jacobians where known.
  virtual SystemLinearization linearize(const Vector& x, const Vector& u) const;

  // df/du alone (control Jacobian B(x)); both testbeds are control affine so
  // this does not depend on u. Default: finite differences at u = u_f.
  virtual Matrix control_jacobian(const Vector& x) const;

  // dL/dx. Default: central finite differences.
  virtual Vector cost_state_gradient(const Vector& x, const Vector& u) const;

  // State weight matrix used for LQR design. Usually cost_quadratic().Q; the
  // UAV adds a tiny regularizing weight on the unpenalized q0 deviation.
  virtual Matrix lqr_state_weight() const { return cost_quadratic().Q; }

  // Indices of state coordinates that are regulated to x_f. The dynamics
  // residual, steady-state detection and final-state errors are measured on
  // these coordinates only (all of them by default; the UAV excludes the
  // horizontal positions).
  virtual std::vector<int> regulated() const;

  // Orthonormal columns spanning the subspace the Riccati design runs on
  // (identity by default). Deviations x - x_f are projected with T' before
  // entering the reduced problem.
  virtual Matrix lqr_basis() const;

  // Hook for states living on a manifold (UAV renormalizes the quaternion).
  virtual void normalize_state(Vector&) const {}

  // Simulation envelope check (UAV aborts outside the +/-300 m altitude band).
  virtual bool in_envelope(const Vector&) const { return true; }

  // l2 error of x relative to x_f over the regulated coordinates.
  double state_error(const Vector& x) const;

  // inf-norm of f(x,u) over the regulated coordinates.
  double residual_inf_norm(const Vector& x, const Vector& u) const;
};

// Initial-condition sampling domains.
//  - Sphere: draws at exact radius about x_f (the Burgers Monte Carlo mode).
//  - UavBox: per-coordinate uniform draws over the UAV start box with Euler
//    angles converted to quaternions; `scale` shrinks every half-width.
struct SamplingDomain {
  enum class Kind { Sphere, UavBox };
  Kind kind = Kind::Sphere;
  double radius = 1.2;
  double scale = 1.0;

  static SamplingDomain sphere(double r) {
    SamplingDomain d;
    d.kind = Kind::Sphere;
    d.radius = r;
    return d;
  }
  static SamplingDomain uav_box(double s = 1.0) {
    SamplingDomain d;
    d.kind = Kind::UavBox;
    d.scale = s;
    return d;
  }
};

std::vector<Vector> sample_initial_conditions(const DynamicsModel& model, const SamplingDomain& domain,
                                              int count, std::uint64_t seed);

// Scalar-first quaternion from Z-Y-X Euler angles (yaw, pitch, roll), q0 >= 0.
Eigen::Vector4d quaternion_from_euler(double yaw, double pitch, double roll);

}  // namespace qrnet
