#pragma once

#include "qrnet/ode.hpp"
#include "qrnet/policies.hpp"
#include "qrnet/spectral.hpp"

namespace qrnet {

enum class Termination { SteadyState, Timeout, EnvelopeAbort };
std::string termination_name(Termination t);

struct SimSettings {
  double rtol = 1e-6;
  double atol = 1e-8;
  double t_max = 30.0;
  double steady_tol = 1e-8;  // ||f||_inf over regulated coords <= tol (1 + ||x||_inf)
  bool store_history = true;
};

struct SimResult {
  std::vector<double> t;
  std::vector<Vector> x;
  std::vector<Vector> u;
  double cost = 0.0;  // integral of L along the run
  Termination termination = Termination::Timeout;
  double final_error = 0.0;  // ||x(t_f) - x_f|| over regulated coordinates
  double t_final = 0.0;
  double quat_drift = 0.0;  // max per-step |1 - ||q||| before renormalization (UAV)
  std::string diagnostics;
};

// Integrates x' = f(x, u(x)) with simultaneous quadrature of the running cost.
// Policy outputs are clipped to the control set before entering the dynamics
// (admissible controllers only; a no-op for saturated architectures).
SimResult simulate_closed_loop(const DynamicsModel& model, const FeedbackPolicy& policy,
                               const Vector& x0, const SimSettings& settings);

struct EquilibriumResult {
  Vector x_bar;
  double offset = 0.0;    // ||x_bar - x_f|| over regulated coordinates
  double residual = 0.0;  // ||f(x_bar, u(x_bar))||_inf over regulated coordinates
  bool converged = false;
  int iterations = 0;
};

// Damped Newton on the regulated components of f(x, u(x)) starting from the
// guess; least-squares steps tolerate the structural rank deficiency of the
// quaternion-norm direction.
EquilibriumResult find_closed_loop_equilibrium(const DynamicsModel& model,
                                               const FeedbackPolicy& policy, const Vector& x_guess,
                                               double tol = 1e-10, int max_iters = 100);

// A_cl = df/dx + (df/du)(du/dx) at (x_bar, u(x_bar))
Matrix closed_loop_jacobian(const DynamicsModel& model, const FeedbackPolicy& policy,
                            const Vector& x_bar);

// abscissa of A_cl restricted to the model's LQR design subspace (identical to
// spectral_abscissa(A_cl) when no reduction applies; for the UAV this removes
// the structural zero eigenvalues of the position integrators and the
// quaternion-norm direction)
double reduced_closed_loop_abscissa(const DynamicsModel& model, const Matrix& A_cl);

struct McRun {
  Vector x0;
  double final_error = 0.0;
  double cost = 0.0;
  Termination termination = Termination::Timeout;
  double t_final = 0.0;
};

struct McStabilityReport {
  std::vector<McRun> runs;
  double worst_case_failure = 0.0;
  bool worst_case_defined = false;
};

McStabilityReport mc_stability(const DynamicsModel& model, const FeedbackPolicy& policy,
                               const SamplingDomain& domain, int n_runs, std::uint64_t seed,
                               const SimSettings& settings, int workers = 1);

struct McOptimalityReport {
  std::vector<McRun> runs;                  // one per supplied (x0, V)
  std::vector<double> suboptimality_pct;    // converged runs only
  std::vector<int> excluded_not_converged;  // indices of non-converged runs
  std::vector<int> excluded_bad_value;      // indices with V(x0) <= 0
  double median = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
};

// Closed-loop cost against the optimal cost V(x0) for each supplied initial
// condition: suboptimality% = 100 (J - V) / V.
McOptimalityReport mc_optimality(const DynamicsModel& model, const FeedbackPolicy& policy,
                                 const std::vector<std::pair<Vector, double>>& values,
                                 const SimSettings& settings, int workers = 1);

// linear-interpolation quantile of unsorted data, p in [0, 1]
double quantile(std::vector<double> data, double p);

}  // namespace qrnet
