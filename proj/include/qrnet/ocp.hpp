#pragma once

#include <optional>

#include "qrnet/lqr.hpp"
#include "qrnet/model.hpp"

namespace qrnet {

// One open-loop solution: the unit of supervision data. Costates are present
// only for the indirect (PMP) path.
struct ExtremalTrajectory {
  Vector t;                 // strictly increasing grid
  std::vector<Vector> x;    // states per node
  std::vector<Vector> lam;  // costates per node (empty when absent)
  std::vector<Vector> u;    // controls per node
  double cost = 0.0;        // V(x0) estimate
  bool converged = false;
  double residual = 0.0;          // solver residual (Newton or defect norm)
  double hamiltonian_drift = 0.0; // max |H(t) - H(0)| (indirect only)
  double hamiltonian_abs = 0.0;   // max |H(t)| (indirect only)
  double horizon = 0.0;
  std::string failure_reason;

  bool has_costates() const { return !lam.empty(); }
};

// H(x, lambda, u) = L(x,u) + lambda' f(x,u)
double hamiltonian(const DynamicsModel& model, const Vector& x, const Vector& lambda, const Vector& u);

// argmin_{u in U} H: u* = clip(u_f - 1/2 R^-1 B(x)' lambda) for control-affine
// dynamics with quadratic control cost.
Vector minimize_hamiltonian(const DynamicsModel& model, const Vector& x, const Vector& lambda);

// characteristic system: x' = f(x, u*), lambda' = -q_x - (df/dx)' lambda
void pmp_rhs(const DynamicsModel& model, const Vector& x, const Vector& lambda, Vector& dx,
             Vector& dlam);

struct IndirectSettings {
  double horizon_init = 2.0;
  double horizon_growth = 2.0;
  int max_horizon_doublings = 10;
  int mesh_nodes = 60;
  int max_mesh_nodes = 480;
  int newton_max_iters = 60;
  int max_damping_halvings = 30;
  double newton_tol = 1e-10;          // scaled residual
  double state_convergence_tol = 1e-3;  // ||x(T)-x_f|| <= tol ||x0-x_f||
  double cost_change_tol = 1e-3;        // relative change between extensions
  double hamiltonian_tol = 1e-5;        // max |H - H(0)| <= tol (1 + |H(0)|)
};

// Collocated PMP two-point BVP (x(0) = x0, lambda(T) = 0) solved by damped
// Newton with horizon continuation; Hermite-Simpson defects on the combined
// (x, lambda) system, banded elimination for the Newton steps.
ExtremalTrajectory solve_open_loop_indirect(const DynamicsModel& model, const Vector& x0,
                                            const IndirectSettings& settings, const LqrSolution& lqr);

struct DirectSettings {
  double horizon_init = 5.0;
  double horizon_growth = 2.0;
  int max_horizon_doublings = 6;
  int mesh_nodes = 60;
  double defect_tol = 1e-6;
  int al_max_outer = 40;
  double penalty_init = 1.0;
  double penalty_growth = 10.0;
  int inner_max_iters = 2000;
  double inner_tol = 1e-8;  // projected-gradient inf norm (scaled)
  double state_convergence_tol = 1e-3;
  double cost_change_tol = 1e-3;
};

// Hermite-Simpson transcription solved as a nonlinear program by an augmented
// Lagrangian with projected L-BFGS inner iterations; control bounds are
// satisfied exactly at the nodes. No costates.
ExtremalTrajectory solve_open_loop_direct(const DynamicsModel& model, const Vector& x0,
                                          const DirectSettings& settings, const LqrSolution& lqr);

// Pooled supervision records (footnote: trajectories need not be
// distinguished; the optimal feedback is time-independent).
struct DatasetRecord {
  Vector x;
  Vector lam;  // empty when absent
  Vector u;
  int traj_id = 0;
  double t = 0.0;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  std::vector<std::pair<Vector, double>> values;  // (x0, V(x0)) per converged trajectory
  std::string model_id;
  std::string method;  // "indirect" | "direct"
  int n_requested = 0;
  int n_converged = 0;
  int n_discarded = 0;
  std::uint64_t seed = 0;
  double mean_horizon = 0.0;
  bool degraded = false;  // fewer than 90% of trajectories converged
  bool has_costates() const { return method == "indirect"; }
};

struct DatagenSettings {
  std::string method = "indirect";
  IndirectSettings indirect;
  DirectSettings direct;
  SamplingDomain domain;
  int max_records_per_traj = 256;
  int workers = 1;
};

Dataset generate_dataset(const DynamicsModel& model, const DatagenSettings& settings, int n_traj,
                         std::uint64_t seed, const LqrSolution& lqr);

}  // namespace qrnet
