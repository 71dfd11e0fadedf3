#include "qrnet/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace qrnet {

void TrainSpec::validate(const Dataset& data) const {
  require(!data.records.empty(), "TrainSpec: dataset is empty");
  require(epochs > 0 && batch_size > 0, "TrainSpec: epochs and batch size must be positive");
  require(optimizer == "adam" || optimizer == "lbfgs", "TrainSpec: unknown optimizer " + optimizer);
  if (lambda_loss_weight > 0.0) {
    require(is_lambda_kind(kind), "TrainSpec: lambda-loss weight requires a lambda kind");
    require(data.has_costates(), "TrainSpec: lambda-loss weight requires costate data");
  }
}

namespace {

Vector flatten_row_major(const Matrix& M) {
  Vector v(M.size());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) v[i * M.cols() + j] = M(i, j);
  return v;
}

}  // namespace

TrainingProblem::TrainingProblem(ArchitectureKind kind, const DynamicsModel& model,
                                 const LqrSolution& lqr, const InputScaling& scaling,
                                 const std::vector<DatasetRecord>& records, double lambda_loss_weight)
    : model_(&model), w_lambda_(lambda_loss_weight) {
  require(!records.empty(), "TrainingProblem: no records");
  tmpl_.kind = kind;
  tmpl_.x_f = model.equilibrium().x_f;
  tmpl_.u_f = model.equilibrium().u_f;
  tmpl_.bounds = model.bounds();
  tmpl_.P = lqr.P_full;
  tmpl_.K = lqr.K_full;
  tmpl_.scaling = scaling;

  R_ = model.cost_quadratic().R;
  R_llt_.compute(R_);
  const bool lambda_kind = is_lambda_kind(kind);
  for (const auto& rec : records) {
    x_.push_back(rec.x);
    u_star_.push_back(rec.u);
    d_.push_back(rec.x - tmpl_.x_f);
    if (lambda_kind) {
      B_.push_back(model.control_jacobian(rec.x));
      if (w_lambda_ > 0.0) {
        require(rec.lam.size() == tmpl_.x_f.size(), "TrainingProblem: missing costate data");
        lam_star_.push_back(rec.lam);
      }
    }
  }
}

Vector TrainingProblem::predict(const MlpParams& mlp, const AnchorValues& anchors, int i) const {
  PolicyCheckpoint ck = tmpl_;
  ck.mlp = mlp;
  if (is_u_kind(ck.kind)) return eval_control(ck, anchors, x_[i]);
  const Vector lam = eval_value_gradient(ck, anchors, x_[i]);
  const Vector u = tmpl_.u_f - 0.5 * R_llt_.solve(B_[i].transpose() * lam);
  return tmpl_.bounds.clip(u);
}

double TrainingProblem::loss(const MlpParams& mlp, const std::vector<int>& batch) const {
  require(!batch.empty(), "loss: empty batch");
  PolicyCheckpoint ck = tmpl_;
  ck.mlp = mlp;
  const AnchorValues anchors = compute_anchors(ck.kind, mlp, ck.scaling, ck.x_f);
  double total = 0.0;
  for (int i : batch) {
    if (is_u_kind(ck.kind)) {
      total += (eval_control(ck, anchors, x_[i]) - u_star_[i]).squaredNorm();
    } else {
      const Vector lam = eval_value_gradient(ck, anchors, x_[i]);
      const Vector u = tmpl_.bounds.clip(Vector(tmpl_.u_f - 0.5 * R_llt_.solve(B_[i].transpose() * lam)));
      total += (u - u_star_[i]).squaredNorm();
      if (w_lambda_ > 0.0) total += w_lambda_ * (lam - lam_star_[i]).squaredNorm();
    }
  }
  return total / batch.size();
}

double TrainingProblem::loss_grad(const MlpParams& mlp, const std::vector<int>& batch,
                                  MlpGrad& grad) const {
  require(!batch.empty(), "loss_grad: empty batch");
  PolicyCheckpoint ck = tmpl_;
  ck.mlp = mlp;
  const int n = ck.state_dim();
  const int m = ck.control_dim();
  const double inv_b = 1.0 / batch.size();
  const Vector s_xf = ck.scaling.scale(ck.x_f);
  const Vector inv_hr = ck.scaling.half_range.cwiseInverse();

  // anchors at the current parameters, with caches for the x_f backprop
  MlpCache cache_xf;
  AnchorValues anchors;
  const bool jac_kind = is_jacobian_kind(ck.kind);
  if (jac_kind) {
    anchors.J_xf = mlp_input_jacobian(mlp, s_xf, &cache_xf) * inv_hr.asDiagonal();
    anchors.N_xf = mlp.W.back() * cache_xf.a.back() + mlp.b.back();
  } else {
    anchors.N_xf = mlp_forward(mlp, s_xf, &cache_xf);
  }

  grad = MlpGrad::zeros_like(mlp);
  double total = 0.0;
  Vector seed_xf = Vector::Zero(mlp.output_dim());
  Matrix U_xf = jac_kind ? Matrix::Zero(anchors.J_xf.rows(), n) : Matrix();

  for (int i : batch) {
    MlpCache cache;
    const Vector s_x = ck.scaling.scale(x_[i]);
    const Vector N_x = mlp_forward(mlp, s_x, &cache);

    if (is_u_kind(ck.kind)) {
      Vector sat_mask = Vector::Ones(m);
      Vector inner;
      switch (ck.kind) {
        case ArchitectureKind::UNn:
          inner = N_x;
          break;
        case ArchitectureKind::UQrnet:
        case ArchitectureKind::UJac: {
          const Vector u_lqr = ck.u_f - ck.K * d_[i];
          sat_mask = ck.bounds.clip_active_mask(u_lqr);
          inner = ck.bounds.clip(u_lqr) + N_x - anchors.N_xf;
          if (ck.kind == ArchitectureKind::UJac) inner -= anchors.J_xf * d_[i];
          break;
        }
        case ArchitectureKind::UMat: {
          const Vector u_lqr = ck.u_f - ck.K * d_[i];
          sat_mask = ck.bounds.clip_active_mask(u_lqr);
          Matrix dN(m, n);
          for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) dN(r, c) = N_x[r * n + c] - anchors.N_xf[r * n + c];
          inner = ck.bounds.clip(u_lqr) + dN * d_[i];
          break;
        }
        default:
          throw std::invalid_argument("loss_grad: unreachable");
      }
      Vector sig, dsig;
      smooth_saturation_vjp(inner, ck.bounds, ck.u_f, sig, dsig);
      const Vector r = sig - u_star_[i];
      total += r.squaredNorm();
      const Vector g = (2.0 * inv_b) * dsig.cwiseProduct(r);

      if (ck.kind == ArchitectureKind::UMat) {
        const Vector seed = flatten_row_major(g * d_[i].transpose());
        mlp_backprop_value(mlp, cache, seed, grad);
        seed_xf -= seed;
      } else {
        mlp_backprop_value(mlp, cache, g, grad);
        if (ck.kind != ArchitectureKind::UNn) seed_xf -= g;
        if (ck.kind == ArchitectureKind::UJac) U_xf -= g * d_[i].transpose();
      }
    } else {
      // lambda kinds
      Vector lam;
      switch (ck.kind) {
        case ArchitectureKind::LambdaNn:
          lam = N_x;
          break;
        case ArchitectureKind::LambdaQrnet:
          lam = 2.0 * ck.P * d_[i] + N_x - anchors.N_xf;
          break;
        case ArchitectureKind::LambdaJac:
          lam = (2.0 * ck.P - anchors.J_xf) * d_[i] + N_x - anchors.N_xf;
          break;
        case ArchitectureKind::LambdaMat: {
          Matrix dN(n, n);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) dN(r, c) = N_x[r * n + c] - anchors.N_xf[r * n + c];
          lam = (2.0 * ck.P + dN) * d_[i];
          break;
        }
        default:
          throw std::invalid_argument("loss_grad: unreachable");
      }
      const Vector u_raw = ck.u_f - 0.5 * R_llt_.solve(B_[i].transpose() * lam);
      const Vector mask = ck.bounds.clip_active_mask(u_raw);
      const Vector u_hat = ck.bounds.clip(u_raw);
      const Vector r = u_hat - u_star_[i];
      total += r.squaredNorm();

      Vector h = -0.5 * B_[i] * R_llt_.solve(Vector((2.0 * inv_b) * mask.cwiseProduct(r)));
      if (w_lambda_ > 0.0) {
        const Vector lr = lam - lam_star_[i];
        total += w_lambda_ * lr.squaredNorm();
        h += (2.0 * w_lambda_ * inv_b) * lr;
      }

      if (ck.kind == ArchitectureKind::LambdaMat) {
        const Vector seed = flatten_row_major(h * d_[i].transpose());
        mlp_backprop_value(mlp, cache, seed, grad);
        seed_xf -= seed;
      } else {
        mlp_backprop_value(mlp, cache, h, grad);
        if (ck.kind != ArchitectureKind::LambdaNn) seed_xf -= h;
        if (ck.kind == ArchitectureKind::LambdaJac) U_xf -= h * d_[i].transpose();
      }
    }
  }

  if (seed_xf.squaredNorm() > 0.0) mlp_backprop_value(mlp, cache_xf, seed_xf, grad);
  if (jac_kind && U_xf.size() > 0 && U_xf.squaredNorm() > 0.0)
    mlp_backprop_jacobian(mlp, cache_xf, U_xf * inv_hr.asDiagonal(), grad);

  return total * inv_b;
}

namespace {

struct AdamState {
  Vector m, v;
  int t = 0;
  void init(int dim) {
    m = Vector::Zero(dim);
    v = Vector::Zero(dim);
    t = 0;
  }
  void step(Vector& theta, const Vector& g, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    theta -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
  }
};

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
}

// strong-Wolfe line search for L-BFGS (bisection/doubling bracketing);
// phi(t) returns (loss, directional derivative) at step t
struct WolfeResult {
  double step = 0.0;
  double f = 0.0;
  bool ok = false;
};

WolfeResult wolfe_search(const std::function<std::pair<double, double>(double)>& phi, double f0,
                         double g0, double init_step) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double t = init_step;
  double f_lo = f0;
  WolfeResult res;
  for (int it = 0; it < 50; ++it) {
    const auto [f_t, g_t] = phi(t);
    if (!std::isfinite(f_t) || f_t > f0 + c1 * t * g0 || (it > 0 && f_t >= f_lo)) {
      hi = t;
    } else if (std::abs(g_t) <= -c2 * g0) {
      res.step = t;
      res.f = f_t;
      res.ok = true;
      return res;
    } else if (g_t >= 0.0) {
      hi = t;
    } else {
      lo = t;
      f_lo = f_t;
    }
    t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
    if (t < 1e-16) break;
  }
  return res;
}

}  // namespace

std::pair<PolicyCheckpoint, TrainReport> fit(const TrainSpec& spec, const Dataset& train_data,
                                             const DynamicsModel& model, const LqrSolution& lqr,
                                             const Dataset* test_data) {
  spec.validate(train_data);
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<Vector> xs;
  xs.reserve(train_data.records.size());
  for (const auto& r : train_data.records) xs.push_back(r.x);
  const InputScaling scaling = InputScaling::from_data(xs);

  const int n = model.state_dim();
  const int m = model.control_dim();
  std::vector<int> widths;
  widths.push_back(n);
  for (int w : spec.hidden_widths) widths.push_back(w);
  widths.push_back(kind_output_dim(spec.kind, n, m));

  MlpParams mlp = MlpParams::random(widths, derive_seed(spec.seed, "init"));
  TrainingProblem prob(spec.kind, model, lqr, scaling, train_data.records, spec.lambda_loss_weight);

  const int count = prob.record_count();
  std::vector<int> all(count);
  std::iota(all.begin(), all.end(), 0);

  TrainReport report;
  report.seed = spec.seed;
  MlpGrad grad = MlpGrad::zeros_like(mlp);
  Vector theta = mlp.flatten();
  Vector theta_final = theta;
  bool aborted = false;

  if (spec.optimizer == "adam") {
    AdamState adam;
    adam.init(static_cast<int>(theta.size()));
    Vector theta_good = theta;
    const std::uint64_t epoch_seed_root = derive_seed(spec.seed, "epoch");
    for (int epoch = 0; epoch < spec.epochs && !aborted; ++epoch) {
      std::vector<int> order = all;
      Rng rng(derive_seed(epoch_seed_root, static_cast<std::uint64_t>(epoch)));
      shuffle_indices(order, rng);
      double epoch_loss = 0.0;
      int batches = 0;
      for (int off = 0; off < count; off += spec.batch_size) {
        const int len = std::min(spec.batch_size, count - off);
        const std::vector<int> batch(order.begin() + off, order.begin() + off + len);
        mlp.unflatten(theta);
        const double l = prob.loss_grad(mlp, batch, grad);
        if (!std::isfinite(l)) {
          aborted = true;  // abort with the last good parameters
          break;
        }
        theta_good = theta;
        adam.step(theta, grad.flatten(), spec.learning_rate);
        epoch_loss += l;
        ++batches;
      }
      if (aborted) break;
      epoch_loss /= std::max(batches, 1);
      report.loss_history.push_back(epoch_loss);
      ++report.iterations;
    }
    theta_final = aborted ? theta_good : theta;
  } else {
    // full-batch L-BFGS with strong-Wolfe line search
    const int mem = 10;
    std::vector<Vector> S, Y;
    mlp.unflatten(theta);
    double f = prob.loss_grad(mlp, all, grad);
    Vector g = grad.flatten();
    report.loss_history.push_back(f);
    int small_change_streak = 0;

    for (int it = 0; it < spec.lbfgs_max_iters; ++it) {
      Vector q = g;
      std::vector<double> alpha(S.size());
      for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
        const double rho_i = 1.0 / Y[i].dot(S[i]);
        alpha[i] = rho_i * S[i].dot(q);
        q -= alpha[i] * Y[i];
      }
      if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().dot(Y.back());
      for (std::size_t i = 0; i < S.size(); ++i) {
        const double rho_i = 1.0 / Y[i].dot(S[i]);
        q += (alpha[i] - rho_i * Y[i].dot(q)) * S[i];
      }
      Vector d = -q;
      double g0 = g.dot(d);
      if (g0 > -1e-18) {
        d = -g;
        g0 = g.dot(d);
        if (g0 > -1e-18) break;  // gradient numerically zero
      }

      Vector g_new;
      auto phi = [&](double t) {
        mlp.unflatten(Vector(theta + t * d));
        MlpGrad gg = MlpGrad::zeros_like(mlp);
        const double ft = prob.loss_grad(mlp, all, gg);
        g_new = gg.flatten();
        return std::make_pair(ft, g_new.dot(d));
      };
      const WolfeResult w = wolfe_search(phi, f, g0, 1.0);
      if (!w.ok) break;  // line search failed: gradient too flat to proceed

      const Vector theta_new = theta + w.step * d;
      const Vector s_vec = theta_new - theta;
      // g_new corresponds to the accepted point (the last phi evaluation)
      const Vector y_vec = g_new - g;
      const double rel_change = std::abs(f - w.f) / std::max(1.0, std::abs(f));
      theta = theta_new;
      f = w.f;
      g = g_new;
      if (s_vec.dot(y_vec) > 1e-12 * s_vec.norm() * y_vec.norm()) {
        S.push_back(s_vec);
        Y.push_back(y_vec);
        if (static_cast<int>(S.size()) > mem) {
          S.erase(S.begin());
          Y.erase(Y.begin());
        }
      }
      report.loss_history.push_back(f);
      ++report.iterations;
      small_change_streak = (rel_change < spec.lbfgs_rel_tol) ? small_change_streak + 1 : 0;
      if (small_change_streak >= 10) break;
    }
    theta_final = theta;
  }

  mlp.unflatten(theta_final);
  PolicyCheckpoint ckpt = finalize_checkpoint(spec.kind, mlp, lqr, model.equilibrium(), model.bounds(),
                                              prob.checkpoint_template().scaling);
  report.final_train_loss = prob.loss(mlp, all);
  if (test_data && !test_data->records.empty()) report.rm_l2 = rm_l2(ckpt, model, test_data->records);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(ckpt), std::move(report)};
}

double policy_mse(const PolicyCheckpoint& ckpt, const DynamicsModel& model,
                  const std::vector<DatasetRecord>& records) {
  require(!records.empty(), "policy_mse: empty record set");
  NnFeedbackPolicy policy(ckpt, model);
  double total = 0.0;
  for (const auto& rec : records) total += (policy.eval(rec.x) - rec.u).squaredNorm();
  return total / records.size();
}

double rm_l2(const PolicyCheckpoint& ckpt, const DynamicsModel& model,
             const std::vector<DatasetRecord>& records) {
  require(!records.empty(), "rm_l2: empty test set");
  NnFeedbackPolicy policy(ckpt, model);
  double mean = 0.0, denom = 0.0;
  for (const auto& rec : records) {
    mean += (policy.eval(rec.x) - rec.u).norm();
    denom = std::max(denom, rec.u.norm());
  }
  if (denom <= 0.0) throw std::runtime_error("rm_l2: degenerate test set (max ||u*|| = 0)");
  return (mean / records.size()) / denom;
}

}  // namespace qrnet
