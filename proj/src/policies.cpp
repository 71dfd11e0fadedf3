#include "qrnet/policies.hpp"

#include <cmath>

namespace qrnet {

bool is_lambda_kind(ArchitectureKind k) {
  return k == ArchitectureKind::LambdaNn || k == ArchitectureKind::LambdaQrnet ||
         k == ArchitectureKind::LambdaJac || k == ArchitectureKind::LambdaMat;
}
bool is_u_kind(ArchitectureKind k) { return !is_lambda_kind(k); }
bool is_matrix_kind(ArchitectureKind k) {
  return k == ArchitectureKind::LambdaMat || k == ArchitectureKind::UMat;
}
bool is_jacobian_kind(ArchitectureKind k) {
  return k == ArchitectureKind::LambdaJac || k == ArchitectureKind::UJac;
}
bool is_guaranteed_kind(ArchitectureKind k) { return is_matrix_kind(k) || is_jacobian_kind(k); }

std::string kind_name(ArchitectureKind k) {
  switch (k) {
    case ArchitectureKind::LambdaNn: return "lambda_nn";
    case ArchitectureKind::UNn: return "u_nn";
    case ArchitectureKind::LambdaQrnet: return "lambda_qrnet";
    case ArchitectureKind::UQrnet: return "u_qrnet";
    case ArchitectureKind::LambdaJac: return "lambda_jac";
    case ArchitectureKind::UJac: return "u_jac";
    case ArchitectureKind::LambdaMat: return "lambda_mat";
    case ArchitectureKind::UMat: return "u_mat";
  }
  throw std::invalid_argument("kind_name: bad kind");
}

ArchitectureKind parse_kind(const std::string& name) {
  for (ArchitectureKind k :
       {ArchitectureKind::LambdaNn, ArchitectureKind::UNn, ArchitectureKind::LambdaQrnet,
        ArchitectureKind::UQrnet, ArchitectureKind::LambdaJac, ArchitectureKind::UJac,
        ArchitectureKind::LambdaMat, ArchitectureKind::UMat}) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("parse_kind: unknown architecture '" + name + "'");
}

int kind_output_dim(ArchitectureKind k, int n, int m) {
  if (k == ArchitectureKind::LambdaMat) return n * n;
  if (k == ArchitectureKind::UMat) return m * n;
  return is_lambda_kind(k) ? n : m;
}

int exact_param_count(ArchitectureKind k, int n, int m, int L, int w) {
  const int out = kind_output_dim(k, n, m);
  if (L == 0) return n * out + out;
  return n * w + (L - 1) * w * w + w * out + (L * w + out);
}

int headline_param_count(ArchitectureKind k, int n, int m, int L, int w) {
  const int Lw2 = L * w * w;
  switch (k) {
    case ArchitectureKind::LambdaNn:
    case ArchitectureKind::LambdaQrnet:
    case ArchitectureKind::LambdaJac: return 2 * w * n + Lw2;
    case ArchitectureKind::LambdaMat: return w * n * n + w * n + Lw2;
    case ArchitectureKind::UNn:
    case ArchitectureKind::UQrnet:
    case ArchitectureKind::UJac: return w * m + w * n + Lw2;
    case ArchitectureKind::UMat: return w * m * n + w * n + Lw2;
  }
  throw std::invalid_argument("headline_param_count: bad kind");
}

InputScaling InputScaling::from_data(const std::vector<Vector>& xs) {
  require(!xs.empty(), "InputScaling: empty data");
  Vector lo = xs.front(), hi = xs.front();
  for (const Vector& x : xs) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  InputScaling s;
  s.center = 0.5 * (lo + hi);
  s.half_range = 0.5 * (hi - lo);
  for (int i = 0; i < s.half_range.size(); ++i)
    if (s.half_range[i] <= 0.0) s.half_range[i] = 1.0;
  return s;
}

SmoothSatConstants SmoothSatConstants::from(const ControlBounds& bounds, const Vector& u_f) {
  bounds.validate(u_f);
  const int m = bounds.dim();
  SmoothSatConstants c;
  c.c1 = Vector::Ones(m);
  c.c2 = Vector::Ones(m);
  for (int i = 0; i < m; ++i) {
    if (!bounds.bounded[i]) continue;
    const double a = u_f[i] - bounds.u_min[i];
    const double b = bounds.u_max[i] - u_f[i];
    c.c1[i] = b / a;
    c.c2[i] = (a + b) / (a * b);
  }
  return c;
}

void smooth_saturation_vjp(const Vector& u, const ControlBounds& bounds, const Vector& u_f,
                           Vector& value, Vector& deriv) {
  const SmoothSatConstants c = SmoothSatConstants::from(bounds, u_f);
  const int m = bounds.dim();
  require(u.size() == m, "smooth_saturation: dimension mismatch");
  value.resize(m);
  deriv.resize(m);
  for (int i = 0; i < m; ++i) {
    if (!bounds.bounded[i]) {
      value[i] = u[i];
      deriv[i] = 1.0;
      continue;
    }
    const double span = bounds.u_max[i] - bounds.u_min[i];
    const double e_raw = -c.c2[i] * (u[i] - u_f[i]);
    const double e = std::clamp(e_raw, -50.0, 50.0);
    const double E = std::exp(e);
    const double den = 1.0 + c.c1[i] * E;
    value[i] = bounds.u_min[i] + span / den;
    const double clip_gate = (e_raw == e) ? 1.0 : 0.0;
    deriv[i] = clip_gate * span * c.c1[i] * c.c2[i] * E / (den * den);
  }
}

Vector smooth_saturation(const Vector& u, const ControlBounds& bounds, const Vector& u_f) {
  Vector v, d;
  smooth_saturation_vjp(u, bounds, u_f, v, d);
  return v;
}

namespace {

Matrix reshape_row_major(const Vector& v, int rows, int cols) {
  require(v.size() == rows * cols, "reshape_row_major: size mismatch");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      v.data(), rows, cols);
}

// network value at x in unscaled coordinates
Vector net_value(const PolicyCheckpoint& ckpt, const Vector& x, MlpCache* cache = nullptr) {
  return mlp_forward(ckpt.mlp, ckpt.scaling.scale(x), cache);
}

// network Jacobian at x, chain rule through the input scaling
Matrix net_jacobian(const PolicyCheckpoint& ckpt, const Vector& x, MlpCache* cache = nullptr) {
  Matrix J = mlp_input_jacobian(ckpt.mlp, ckpt.scaling.scale(x), cache);
  return J * ckpt.scaling.half_range.cwiseInverse().asDiagonal();
}

// hard saturation of the LQR term with its active mask
Vector sat_lqr(const PolicyCheckpoint& ckpt, const Vector& x, Vector* mask = nullptr) {
  const Vector u_lqr = ckpt.u_f - ckpt.K * (x - ckpt.x_f);
  if (mask) *mask = ckpt.bounds.clip_active_mask(u_lqr);
  return ckpt.bounds.clip(u_lqr);
}

// inner (pre-saturation) expression of the u-kinds
Vector u_kind_inner(const PolicyCheckpoint& ckpt, const AnchorValues& anchors, const Vector& x,
                    Vector* sat_mask) {
  const int n = ckpt.state_dim(), m = ckpt.control_dim();
  const Vector d = x - ckpt.x_f;
  switch (ckpt.kind) {
    case ArchitectureKind::UNn:
      if (sat_mask) *sat_mask = Vector::Ones(m);
      return net_value(ckpt, x);
    case ArchitectureKind::UQrnet:
      return sat_lqr(ckpt, x, sat_mask) + net_value(ckpt, x) - anchors.N_xf;
    case ArchitectureKind::UJac:
      return sat_lqr(ckpt, x, sat_mask) - anchors.J_xf * d + net_value(ckpt, x) - anchors.N_xf;
    case ArchitectureKind::UMat: {
      const Matrix dN = reshape_row_major(net_value(ckpt, x) - anchors.N_xf, m, n);
      return sat_lqr(ckpt, x, sat_mask) + dN * d;
    }
    default:
      throw std::invalid_argument("u_kind_inner: not a u-kind checkpoint");
  }
}

}  // namespace

AnchorValues compute_anchors(ArchitectureKind kind, const MlpParams& mlp, const InputScaling& scaling,
                             const Vector& x_f) {
  AnchorValues a;
  const Vector s = scaling.scale(x_f);
  if (is_jacobian_kind(kind)) {
    MlpCache cache;
    a.J_xf = mlp_input_jacobian(mlp, s, &cache) * scaling.half_range.cwiseInverse().asDiagonal();
    a.N_xf = mlp_forward(mlp, s);
  } else {
    a.N_xf = mlp_forward(mlp, s);
  }
  return a;
}

PolicyCheckpoint finalize_checkpoint(ArchitectureKind kind, MlpParams mlp, const LqrSolution& lqr,
                                     const EquilibriumPair& eq, const ControlBounds& bounds,
                                     const InputScaling& scaling) {
  mlp.validate();
  const int n = static_cast<int>(eq.x_f.size());
  const int m = static_cast<int>(eq.u_f.size());
  require(mlp.input_dim() == n, "finalize_checkpoint: network input dimension mismatch");
  require(mlp.output_dim() == kind_output_dim(kind, n, m),
          "finalize_checkpoint: network output dimension mismatch for " + kind_name(kind));
  require(lqr.P_full.rows() == n && lqr.K_full.cols() == n && lqr.K_full.rows() == m,
          "finalize_checkpoint: LQR dimensions mismatch");

  PolicyCheckpoint ckpt;
  ckpt.kind = kind;
  ckpt.mlp = std::move(mlp);
  ckpt.x_f = eq.x_f;
  ckpt.u_f = eq.u_f;
  ckpt.bounds = bounds;
  ckpt.P = lqr.P_full;
  ckpt.K = lqr.K_full;
  ckpt.scaling = scaling;

  const AnchorValues anchors = compute_anchors(kind, ckpt.mlp, scaling, eq.x_f);
  ckpt.frozen_N_xf = anchors.N_xf;
  if (is_jacobian_kind(kind)) ckpt.frozen_J_xf = anchors.J_xf;
  return ckpt;
}

Vector eval_value_gradient(const PolicyCheckpoint& ckpt, const AnchorValues& anchors, const Vector& x) {
  require(is_lambda_kind(ckpt.kind), "eval_value_gradient: not a lambda-kind checkpoint");
  require(x.size() == ckpt.state_dim(), "eval_value_gradient: dimension mismatch");
  const int n = ckpt.state_dim();
  const Vector d = x - ckpt.x_f;
  switch (ckpt.kind) {
    case ArchitectureKind::LambdaNn:
      return net_value(ckpt, x);
    case ArchitectureKind::LambdaQrnet:
      return 2.0 * ckpt.P * d + net_value(ckpt, x) - anchors.N_xf;
    case ArchitectureKind::LambdaJac:
      return (2.0 * ckpt.P - anchors.J_xf) * d + net_value(ckpt, x) - anchors.N_xf;
    case ArchitectureKind::LambdaMat: {
      const Matrix dN = reshape_row_major(net_value(ckpt, x) - anchors.N_xf, n, n);
      return (2.0 * ckpt.P + dN) * d;
    }
    default:
      throw std::invalid_argument("eval_value_gradient: unreachable");
  }
}

Vector eval_value_gradient_model(const PolicyCheckpoint& ckpt, const Vector& x) {
  AnchorValues anchors{ckpt.frozen_N_xf, ckpt.frozen_J_xf};
  return eval_value_gradient(ckpt, anchors, x);
}

Matrix value_gradient_state_jacobian(const PolicyCheckpoint& ckpt, const AnchorValues& anchors,
                                     const Vector& x) {
  require(is_lambda_kind(ckpt.kind), "value_gradient_state_jacobian: not a lambda kind");
  const int n = ckpt.state_dim();
  const Vector d = x - ckpt.x_f;
  switch (ckpt.kind) {
    case ArchitectureKind::LambdaNn:
      return net_jacobian(ckpt, x);
    case ArchitectureKind::LambdaQrnet:
      return 2.0 * ckpt.P + net_jacobian(ckpt, x);
    case ArchitectureKind::LambdaJac:
      return 2.0 * ckpt.P - anchors.J_xf + net_jacobian(ckpt, x);
    case ArchitectureKind::LambdaMat: {
      const Matrix dN = reshape_row_major(net_value(ckpt, x) - anchors.N_xf, n, n);
      Matrix J = 2.0 * ckpt.P + dN;
      const Matrix Jnet = net_jacobian(ckpt, x);  // (n*n) x n
      for (int j = 0; j < n; ++j) {
        const Matrix col_mat = reshape_row_major(Jnet.col(j), n, n);
        J.col(j) += col_mat * d;
      }
      return J;
    }
    default:
      throw std::invalid_argument("value_gradient_state_jacobian: unreachable");
  }
}

Vector control_from_value_gradient(const DynamicsModel& model, const Vector& x, const Vector& lambda) {
  require(lambda.size() == model.state_dim(), "control_from_value_gradient: dimension mismatch");
  const Matrix B = model.control_jacobian(x);
  const Matrix R = model.cost_quadratic().R;
  const Vector u = model.equilibrium().u_f - 0.5 * R.llt().solve(B.transpose() * lambda);
  return model.bounds().clip(u);
}

Vector eval_control(const PolicyCheckpoint& ckpt, const AnchorValues& anchors, const Vector& x) {
  require(is_u_kind(ckpt.kind), "eval_control: not a u-kind checkpoint");
  require(x.size() == ckpt.state_dim(), "eval_control: dimension mismatch");
  return smooth_saturation(u_kind_inner(ckpt, anchors, x, nullptr), ckpt.bounds, ckpt.u_f);
}

Vector eval_control_model(const PolicyCheckpoint& ckpt, const Vector& x) {
  AnchorValues anchors{ckpt.frozen_N_xf, ckpt.frozen_J_xf};
  return eval_control(ckpt, anchors, x);
}

Matrix policy_state_jacobian(const PolicyCheckpoint& ckpt, const DynamicsModel& model, const Vector& x) {
  const int n = ckpt.state_dim(), m = ckpt.control_dim();
  AnchorValues anchors{ckpt.frozen_N_xf, ckpt.frozen_J_xf};

  if (is_u_kind(ckpt.kind)) {
    Vector sat_mask;
    const Vector inner = u_kind_inner(ckpt, anchors, x, &sat_mask);
    Vector sig, dsig;
    smooth_saturation_vjp(inner, ckpt.bounds, ckpt.u_f, sig, dsig);

    Matrix Jinner;
    switch (ckpt.kind) {
      case ArchitectureKind::UNn:
        Jinner = net_jacobian(ckpt, x);
        break;
      case ArchitectureKind::UQrnet:
        Jinner = sat_mask.asDiagonal() * (-ckpt.K) + net_jacobian(ckpt, x);
        break;
      case ArchitectureKind::UJac:
        Jinner = sat_mask.asDiagonal() * (-ckpt.K) - anchors.J_xf + net_jacobian(ckpt, x);
        break;
      case ArchitectureKind::UMat: {
        const Vector d = x - ckpt.x_f;
        const Matrix dN = reshape_row_major(net_value(ckpt, x) - anchors.N_xf, m, n);
        Jinner = sat_mask.asDiagonal() * (-ckpt.K) + dN;
        const Matrix Jnet = net_jacobian(ckpt, x);  // (m*n) x n
        for (int j = 0; j < n; ++j) Jinner.col(j) += reshape_row_major(Jnet.col(j), m, n) * d;
        break;
      }
      default:
        throw std::invalid_argument("policy_state_jacobian: unreachable");
    }
    return dsig.asDiagonal() * Jinner;
  }

  // lambda kinds: u = clip(u_f - 1/2 R^-1 B(x)' lambda(x))
  const Vector lambda = eval_value_gradient(ckpt, anchors, x);
  const Matrix B = model.control_jacobian(x);
  const Matrix R = model.cost_quadratic().R;
  const Vector u_raw = ckpt.u_f - 0.5 * R.llt().solve(B.transpose() * lambda);
  const Vector mask = ckpt.bounds.clip_active_mask(u_raw);

  const Matrix Jlam = value_gradient_state_jacobian(ckpt, anchors, x);
  Matrix J = -0.5 * R.llt().solve(B.transpose() * Jlam);

  // state dependence of B(x)' lambda with lambda held fixed
  Matrix Bterm(m, n);
  Vector xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    Bterm.col(j) =
        (model.control_jacobian(xp).transpose() * lambda - model.control_jacobian(xm).transpose() * lambda) /
        (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  J += -0.5 * R.llt().solve(Bterm);
  return mask.asDiagonal() * J;
}

}  // namespace qrnet
