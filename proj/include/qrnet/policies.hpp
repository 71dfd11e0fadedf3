#pragma once

#include "qrnet/lqr.hpp"
#include "qrnet/mlp.hpp"
#include "qrnet/model.hpp"

namespace qrnet {

// The eight feedback architectures. lambda-kinds approximate the value
// gradient and recover a control through the Hamiltonian minimization map;
// u-kinds approximate the control directly behind the smooth saturation.
// The *_jac and *_mat kinds recover the LQR gain at x_f exactly for any
// parameter values and are therefore locally stabilizing by construction.
enum class ArchitectureKind {
  LambdaNn,
  UNn,
  LambdaQrnet,
  UQrnet,
  LambdaJac,
  UJac,
  LambdaMat,
  UMat,
};

bool is_lambda_kind(ArchitectureKind k);
bool is_u_kind(ArchitectureKind k);
bool is_matrix_kind(ArchitectureKind k);
bool is_jacobian_kind(ArchitectureKind k);
bool is_guaranteed_kind(ArchitectureKind k);
std::string kind_name(ArchitectureKind k);
ArchitectureKind parse_kind(const std::string& name);

// network output dimension for a given kind on an (n, m) system
int kind_output_dim(ArchitectureKind k, int n, int m);

// Exact parameter count for widths [n, w x L, out(kind)] including biases:
//   n w + (L-1) w^2 + w out + (L w + out).
// The headline scaling formulas (e.g. u_mat: w m n + w n + L w^2) count L w^2
// hidden weights and no biases; exact = headline - w^2 + L w + out.
int exact_param_count(ArchitectureKind k, int n, int m, int hidden_layers, int width);
int headline_param_count(ArchitectureKind k, int n, int m, int hidden_layers, int width);

// Elementwise affine map of states to [-1, 1]; identity when half_range = 1.
struct InputScaling {
  Vector center;
  Vector half_range;

  static InputScaling identity(int n) {
    return InputScaling{Vector::Zero(n), Vector::Ones(n)};
  }
  // hull of a set of states; zero-width coordinates get half-range 1
  static InputScaling from_data(const std::vector<Vector>& xs);

  Vector scale(const Vector& x) const { return ((x - center).array() / half_range.array()); }
  Vector unscale(const Vector& s) const { return center.array() + s.array() * half_range.array(); }
};

// Saturation constants of the generalized logistic (per bounded channel):
//   c1 = (u_max - u_f) / (u_f - u_min),
//   c2 = (u_max - u_min) / ((u_max - u_f)(u_f - u_min)).
struct SmoothSatConstants {
  Vector c1, c2;
  static SmoothSatConstants from(const ControlBounds& bounds, const Vector& u_f);
};

// sigma(u): strictly interior smooth saturation with sigma(u_f) = u_f and
// sigma'(u_f) = 1; unbounded channels pass through unchanged. The exponent is
// clipped to +/-50 before exponentiation.
Vector smooth_saturation(const Vector& u, const ControlBounds& bounds, const Vector& u_f);
// value and elementwise derivative together
void smooth_saturation_vjp(const Vector& u, const ControlBounds& bounds, const Vector& u_f,
                           Vector& value, Vector& deriv);

// A trained (or random) controller frozen into an evaluable object: network
// parameters plus the constants the formulas need. frozen_N_xf and, for the
// Jacobian kinds, frozen_J_xf cache the network value/Jacobian at x_f so
// online evaluation never re-derives them.
struct PolicyCheckpoint {
  int schema_version = 1;
  ArchitectureKind kind = ArchitectureKind::UMat;
  MlpParams mlp;
  Vector x_f, u_f;
  ControlBounds bounds;
  Matrix P;  // full-state LQR value matrix (lifted if the design was reduced)
  Matrix K;  // full-state LQR gain
  InputScaling scaling;
  Vector frozen_N_xf;
  Matrix frozen_J_xf;  // Jacobian kinds only (in unscaled state coordinates)

  int state_dim() const { return static_cast<int>(x_f.size()); }
  int control_dim() const { return static_cast<int>(u_f.size()); }
};

// Network value/Jacobian at x_f used by the formulas; either the frozen caches
// or freshly computed values during training.
struct AnchorValues {
  Vector N_xf;
  Matrix J_xf;  // empty unless a Jacobian kind
};

AnchorValues compute_anchors(ArchitectureKind kind, const MlpParams& mlp, const InputScaling& scaling,
                             const Vector& x_f);

PolicyCheckpoint finalize_checkpoint(ArchitectureKind kind, MlpParams mlp, const LqrSolution& lqr,
                                     const EquilibriumPair& eq, const ControlBounds& bounds,
                                     const InputScaling& scaling);

// lambda-kind evaluation: the approximate value gradient at x.
Vector eval_value_gradient(const PolicyCheckpoint& ckpt, const AnchorValues& anchors, const Vector& x);
Vector eval_value_gradient_model(const PolicyCheckpoint& ckpt, const Vector& x);
// d lambda_hat / dx
Matrix value_gradient_state_jacobian(const PolicyCheckpoint& ckpt, const AnchorValues& anchors,
                                     const Vector& x);

// u = clip(u_f - 1/2 R^-1 B(x)' lambda, bounds): the Hamiltonian minimizer for
// control-affine dynamics with quadratic control cost.
Vector control_from_value_gradient(const DynamicsModel& model, const Vector& x, const Vector& lambda);

// u-kind evaluation.
Vector eval_control(const PolicyCheckpoint& ckpt, const AnchorValues& anchors, const Vector& x);
Vector eval_control_model(const PolicyCheckpoint& ckpt, const Vector& x);

// Analytic chain-rule Jacobian of the full policy (either kind family).
Matrix policy_state_jacobian(const PolicyCheckpoint& ckpt, const DynamicsModel& model, const Vector& x);

// Uniform callable used by simulation and evaluation.
class FeedbackPolicy {
 public:
  virtual ~FeedbackPolicy() = default;
  virtual Vector eval(const Vector& x) const = 0;
  virtual Matrix state_jacobian(const Vector& x) const = 0;
  virtual std::string name() const = 0;
};

class NnFeedbackPolicy : public FeedbackPolicy {
 public:
  NnFeedbackPolicy(PolicyCheckpoint ckpt, const DynamicsModel& model)
      : ckpt_(std::move(ckpt)), model_(&model) {}
  Vector eval(const Vector& x) const override {
    if (is_u_kind(ckpt_.kind)) return eval_control_model(ckpt_, x);
    return control_from_value_gradient(*model_, x, eval_value_gradient_model(ckpt_, x));
  }
  Matrix state_jacobian(const Vector& x) const override {
    return policy_state_jacobian(ckpt_, *model_, x);
  }
  std::string name() const override { return kind_name(ckpt_.kind); }
  const PolicyCheckpoint& checkpoint() const { return ckpt_; }

 private:
  PolicyCheckpoint ckpt_;
  const DynamicsModel* model_;
};

class LqrFeedbackPolicy : public FeedbackPolicy {
 public:
  explicit LqrFeedbackPolicy(LqrPolicy policy) : policy_(std::move(policy)) {}
  Vector eval(const Vector& x) const override { return policy_(x); }
  Matrix state_jacobian(const Vector& x) const override { return policy_.state_jacobian(x); }
  std::string name() const override { return "lqr"; }
  const LqrPolicy& inner() const { return policy_; }

 private:
  LqrPolicy policy_;
};

}  // namespace qrnet
