#include "qrnet/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace qrnet {

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::SteadyState: return "steady_state";
    case Termination::Timeout: return "timeout";
    case Termination::EnvelopeAbort: return "envelope_abort";
  }
  return "unknown";
}

SimResult simulate_closed_loop(const DynamicsModel& model, const FeedbackPolicy& policy,
                               const Vector& x0, const SimSettings& st) {
  require(all_finite(x0) && x0.size() == model.state_dim(), "simulate: bad initial state");
  const int n = model.state_dim();
  const ControlBounds& bounds = model.bounds();

  SimResult out;
  Vector y(n + 1);
  y.head(n) = x0;
  model.normalize_state(y);
  y[n] = 0.0;

  auto control = [&](const Vector& x) { return bounds.clip(policy.eval(x)); };
  auto rhs = [&](double, const Vector& yy) {
    const Vector x = yy.head(n);
    const Vector u = control(x);
    Vector dy(n + 1);
    dy.head(n) = model.rhs(x, u);
    dy[n] = model.running_cost(x, u);
    return dy;
  };

  if (st.store_history) {
    out.t.push_back(0.0);
    out.x.push_back(y.head(n));
    out.u.push_back(control(y.head(n)));
  }

  bool steady = false, envelope = false;
  auto observer = [&](double t, Vector& yy, double) -> bool {
    Vector x = yy.head(n);
    if (model.id() == "uav") {
      const double qnorm = x.segment<4>(6).norm();
      out.quat_drift = std::max(out.quat_drift, std::abs(1.0 - qnorm));
    }
    model.normalize_state(x);
    yy.head(n) = x;
    if (st.store_history) {
      out.t.push_back(t);
      out.x.push_back(x);
      out.u.push_back(control(x));
    }
    out.t_final = t;
    if (!model.in_envelope(x)) {
      envelope = true;
      return false;
    }
    const Vector u = control(x);
    if (model.residual_inf_norm(x, u) <= st.steady_tol * (1.0 + inf_norm(x))) {
      steady = true;
      return false;
    }
    return true;
  };

  OdeSettings ode;
  ode.rtol = st.rtol;
  ode.atol = st.atol;
  ode.h_max = std::max(1.0, st.t_max / 100.0);
  const OdeStatus status = integrate_rk45(rhs, 0.0, st.t_max, y, ode, observer);

  out.cost = y[n];
  out.final_error = model.state_error(y.head(n));
  if (steady) {
    out.termination = Termination::SteadyState;
  } else if (envelope || !status.ok) {
    out.termination = Termination::EnvelopeAbort;
    out.diagnostics = status.message;
  } else {
    out.termination = Termination::Timeout;
    out.t_final = st.t_max;
  }
  return out;
}

EquilibriumResult find_closed_loop_equilibrium(const DynamicsModel& model,
                                               const FeedbackPolicy& policy, const Vector& x_guess,
                                               double tol, int max_iters) {
  const std::vector<int> idx = model.regulated();
  const int k = static_cast<int>(idx.size());

  auto residual = [&](const Vector& x) {
    const Vector f = model.rhs(x, model.bounds().clip(policy.eval(x)));
    Vector r(k);
    for (int i = 0; i < k; ++i) r[i] = f[idx[i]];
    return r;
  };

  EquilibriumResult out;
  Vector x = x_guess;
  model.normalize_state(x);
  Vector res = residual(x);
  double rnorm = inf_norm(res);

  for (int iter = 0; iter < max_iters; ++iter) {
    const double tol_abs = tol * (1.0 + inf_norm(x));
    if (rnorm <= tol_abs) {
      out.converged = true;
      break;
    }
    Matrix J(k, k);
    Vector xp = x, xm = x;
    for (int j = 0; j < k; ++j) {
      const int cj = idx[j];
      const double h = 1e-7 * (1.0 + std::abs(x[cj]));
      xp[cj] = x[cj] + h;
      xm[cj] = x[cj] - h;
      J.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
      xp[cj] = x[cj];
      xm[cj] = x[cj];
    }
    const Vector step = J.colPivHouseholderQr().solve(-res);
    double s = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      Vector cand = x;
      for (int j = 0; j < k; ++j) cand[idx[j]] += s * step[j];
      model.normalize_state(cand);
      Vector cres;
      try {
        cres = residual(cand);
      } catch (const std::exception&) {
        s *= 0.5;
        continue;
      }
      const double cnorm = inf_norm(cres);
      if (cnorm < rnorm || cnorm <= tol_abs) {
        x = std::move(cand);
        res = std::move(cres);
        rnorm = cnorm;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    out.iterations = iter + 1;
    if (!accepted) break;
  }

  const double tol_abs = tol * (1.0 + inf_norm(x));
  out.converged = rnorm <= tol_abs;
  out.x_bar = x;
  out.residual = rnorm;
  out.offset = model.state_error(x);
  return out;
}

Matrix closed_loop_jacobian(const DynamicsModel& model, const FeedbackPolicy& policy,
                            const Vector& x_bar) {
  const Vector u = model.bounds().clip(policy.eval(x_bar));
  const SystemLinearization lin = model.linearize(x_bar, u);
  return lin.A + lin.B * policy.state_jacobian(x_bar);
}

double reduced_closed_loop_abscissa(const DynamicsModel& model, const Matrix& A_cl) {
  const Matrix T = model.lqr_basis();
  return spectral_abscissa(T.transpose() * A_cl * T);
}

McStabilityReport mc_stability(const DynamicsModel& model, const FeedbackPolicy& policy,
                               const SamplingDomain& domain, int n_runs, std::uint64_t seed,
                               const SimSettings& settings, int workers) {
  McStabilityReport report;
  const auto x0s = sample_initial_conditions(model, domain, n_runs, derive_seed(seed, "mc"));
  report.runs.resize(n_runs);

  SimSettings st = settings;
  st.store_history = false;

  auto run_one = [&](int i) {
    McRun run;
    run.x0 = x0s[i];
    try {
      const SimResult sim = simulate_closed_loop(model, policy, x0s[i], st);
      run.final_error = sim.final_error;
      run.cost = sim.cost;
      run.termination = sim.termination;
      run.t_final = sim.t_final;
    } catch (const std::exception&) {
      run.final_error = std::numeric_limits<double>::infinity();
      run.termination = Termination::EnvelopeAbort;
    }
    report.runs[i] = std::move(run);
  };

  if (workers <= 1 || n_runs <= 1) {
    for (int i = 0; i < n_runs; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(workers, n_runs); ++w)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  for (const auto& run : report.runs) {
    report.worst_case_failure = std::max(report.worst_case_failure, run.final_error);
    report.worst_case_defined = true;
  }
  return report;
}

McOptimalityReport mc_optimality(const DynamicsModel& model, const FeedbackPolicy& policy,
                                 const std::vector<std::pair<Vector, double>>& values,
                                 const SimSettings& settings, int workers) {
  McOptimalityReport report;
  const int n_runs = static_cast<int>(values.size());
  report.runs.resize(n_runs);

  SimSettings st = settings;
  st.store_history = false;

  auto run_one = [&](int i) {
    McRun run;
    run.x0 = values[i].first;
    try {
      const SimResult sim = simulate_closed_loop(model, policy, run.x0, st);
      run.final_error = sim.final_error;
      run.cost = sim.cost;
      run.termination = sim.termination;
      run.t_final = sim.t_final;
    } catch (const std::exception&) {
      run.final_error = std::numeric_limits<double>::infinity();
      run.termination = Termination::EnvelopeAbort;
    }
    report.runs[i] = std::move(run);
  };

  if (workers <= 1 || n_runs <= 1) {
    for (int i = 0; i < n_runs; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(workers, n_runs); ++w)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  for (int i = 0; i < n_runs; ++i) {
    const double V = values[i].second;
    if (V <= 0.0) {
      report.excluded_bad_value.push_back(i);
      continue;
    }
    const McRun& run = report.runs[i];
    const double x0_err = model.state_error(run.x0);
    const bool converged = run.termination == Termination::SteadyState ||
                           run.final_error <= 1e-3 * std::max(1.0, x0_err);
    if (!converged) {
      report.excluded_not_converged.push_back(i);
      continue;
    }
    report.suboptimality_pct.push_back(100.0 * (run.cost - V) / V);
  }
  if (!report.suboptimality_pct.empty()) {
    report.median = quantile(report.suboptimality_pct, 0.5);
    report.q1 = quantile(report.suboptimality_pct, 0.25);
    report.q3 = quantile(report.suboptimality_pct, 0.75);
  }
  return report;
}

double quantile(std::vector<double> data, double p) {
  require(!data.empty(), "quantile: empty data");
  require(p >= 0.0 && p <= 1.0, "quantile: p out of range");
  std::sort(data.begin(), data.end());
  const double h = p * (static_cast<double>(data.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= data.size()) return data.back();
  const double w = h - static_cast<double>(lo);
  return data[lo] + w * (data[lo + 1] - data[lo]);
}

}  // namespace qrnet
