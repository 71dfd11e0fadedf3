#pragma once

#include "qrnet/ocp.hpp"
#include "qrnet/policies.hpp"

namespace qrnet {

struct TrainSpec {
  ArchitectureKind kind = ArchitectureKind::UMat;
  std::vector<int> hidden_widths = {32, 32, 32, 32, 32};
  std::string optimizer = "lbfgs";  // "adam" | "lbfgs"
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 1500;          // Adam
  int lbfgs_max_iters = 5000;
  double lbfgs_rel_tol = 1e-9;  // relative loss change, sustained over 10 iters
  double lambda_loss_weight = 0.0;
  std::uint64_t seed = 0;

  void validate(const Dataset& data) const;
};

struct TrainReport {
  std::vector<double> loss_history;
  double wall_time_s = 0.0;
  double final_train_loss = 0.0;
  double rm_l2 = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  int iterations = 0;
};

// Control-MSE training objective (plus the optional value-gradient MSE term):
// exposes loss and exact parameter gradients for every architecture kind,
// with the network anchors N(x_f) and dN/dx(x_f) recomputed at the current
// parameters on every evaluation.
class TrainingProblem {
 public:
  TrainingProblem(ArchitectureKind kind, const DynamicsModel& model, const LqrSolution& lqr,
                  const InputScaling& scaling, const std::vector<DatasetRecord>& records,
                  double lambda_loss_weight);

  int record_count() const { return static_cast<int>(x_.size()); }

  double loss(const MlpParams& mlp, const std::vector<int>& batch) const;
  double loss_grad(const MlpParams& mlp, const std::vector<int>& batch, MlpGrad& grad) const;

  // predicted control for one record index at the given parameters
  Vector predict(const MlpParams& mlp, const AnchorValues& anchors, int i) const;

  const PolicyCheckpoint& checkpoint_template() const { return tmpl_; }

 private:
  PolicyCheckpoint tmpl_;  // kind/P/K/eq/bounds/scaling; mlp swapped per call
  const DynamicsModel* model_;
  double w_lambda_;
  std::vector<Vector> x_, u_star_, lam_star_, d_;  // d = x - x_f
  std::vector<Matrix> B_;                          // lambda kinds: control Jacobians
  Matrix R_;
  Eigen::LLT<Matrix> R_llt_;
};

std::pair<PolicyCheckpoint, TrainReport> fit(const TrainSpec& spec, const Dataset& train_data,
                                             const DynamicsModel& model, const LqrSolution& lqr,
                                             const Dataset* test_data = nullptr);

// mean squared control error of a finalized checkpoint on a record set
double policy_mse(const PolicyCheckpoint& ckpt, const DynamicsModel& model,
                  const std::vector<DatasetRecord>& records);

// relative mean l2 test error: mean ||u_hat - u*||_2 / max ||u*||_2
double rm_l2(const PolicyCheckpoint& ckpt, const DynamicsModel& model,
             const std::vector<DatasetRecord>& records);

}  // namespace qrnet
