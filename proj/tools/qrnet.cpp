// qrnet: LQR-anchored neural feedback toolkit.
// Subcommands: trim, lqr, datagen, train, simulate, eval, run, report.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>

#include "qrnet/experiment.hpp"

namespace {

using namespace qrnet;

int cmd_trim(const std::string& params_file, double airspeed) {
  UavParams params = params_file.empty() ? UavParams() : load_uav_params(params_file);
  const EquilibriumPair eq = compute_trim(params, airspeed);
  const Vector f = uav::rhs(params, eq.x_f, eq.u_f);
  double res = 0.0;
  for (int i = 2; i < 13; ++i) res = std::max(res, std::abs(f[i]));
  std::cout << "trim at " << airspeed << " m/s\n";
  std::cout << "  alpha = theta = " << std::asin(eq.x_f[5] / airspeed) << " rad\n";
  std::cout << "  V_body = [" << eq.x_f.segment<3>(3).transpose() << "]\n";
  std::cout << "  q = [" << eq.x_f.segment<4>(6).transpose() << "]\n";
  std::cout << "  u_f (throttle, aileron, elevator, rudder) = [" << eq.u_f.transpose() << "]\n";
  std::cout << "  residual (regulated components) = " << res << "\n";
  return 0;
}

int cmd_lqr(const std::string& model_cfg, const std::string& out) {
  auto model = load_model(model_cfg);
  const LqrSolution sol = lqr_for_model(*model);
  std::cout << "model " << model->id() << ": design dimension " << sol.P.rows() << "\n";
  std::cout << "  riccati residual      = " << sol.riccati_residual << "\n";
  std::cout << "  closed-loop abscissa  = " << sol.closed_loop_abscissa << "\n";
  std::cout << "  ||K||_inf             = " << inf_norm(sol.K_full) << "\n";
  std::cout << "  gain rows (m x n_full) = " << sol.K_full.rows() << " x " << sol.K_full.cols() << "\n";
  if (!out.empty()) {
    save_lqr_policy(sol, model->equilibrium(), out);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_datagen(const std::string& model_cfg, const std::string& method, int n_traj,
                std::uint64_t seed, const std::string& out, int workers, double radius,
                double scale) {
  auto model = load_model(model_cfg);
  const LqrSolution lqr = lqr_for_model(*model);
  DatagenSettings st;
  st.method = method;
  st.workers = workers;
  st.domain = (model->id() == "uav") ? SamplingDomain::uav_box(scale) : SamplingDomain::sphere(radius);
  const Dataset ds = generate_dataset(*model, st, n_traj, seed, lqr);
  save_dataset(ds, out);
  std::cout << "dataset: " << ds.n_converged << "/" << ds.n_requested << " trajectories converged, "
            << ds.records.size() << " records";
  if (ds.degraded) std::cout << " [DEGRADED]";
  std::cout << "\nwrote " << out << "\n";
  return ds.degraded ? 3 : 0;
}

int cmd_train(const std::string& model_cfg, const std::string& data_dir, const std::string& arch,
              const std::string& optimizer, double lr, int batch, int epochs, std::uint64_t seed,
              const std::string& out, const std::string& test_dir, double lambda_weight) {
  auto model = load_model(model_cfg);
  const LqrSolution lqr = lqr_for_model(*model);
  const Dataset train_data = load_dataset(data_dir);
  Dataset test_data;
  if (!test_dir.empty()) test_data = load_dataset(test_dir);

  TrainSpec spec;
  spec.kind = parse_kind(arch);
  spec.optimizer = optimizer;
  spec.learning_rate = lr;
  spec.batch_size = batch;
  spec.epochs = epochs;
  spec.lbfgs_max_iters = std::max(epochs, 100);
  spec.seed = seed;
  spec.lambda_loss_weight = lambda_weight;

  auto [ckpt, report] = fit(spec, train_data, *model, lqr, test_dir.empty() ? nullptr : &test_data);
  save_checkpoint(ckpt, out);
  const std::filesystem::path report_path = std::filesystem::path(out).parent_path() / "report.json";
  write_text_file(report_path, train_report_to_json(report));
  std::cout << "trained " << arch << ": final loss " << report.final_train_loss;
  if (std::isfinite(report.rm_l2)) std::cout << ", RM-l2 " << report.rm_l2;
  std::cout << ", " << report.wall_time_s << " s\nwrote " << out << "\n";
  return 0;
}

int cmd_simulate(const std::string& model_cfg, const std::string& policy_file, const std::string& x0_csv,
                 double perturb, std::uint64_t seed, double t_max, const std::string& out) {
  auto model = load_model(model_cfg);
  auto policy = load_policy(policy_file, *model);

  Vector x0;
  if (!x0_csv.empty()) {
    std::vector<double> vals;
    std::stringstream ss(x0_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    x0 = Eigen::Map<Vector>(vals.data(), vals.size());
  } else {
    Rng rng(seed);
    x0 = model->equilibrium().x_f;
    for (int i = 0; i < x0.size(); ++i) x0[i] += perturb * rng.uniform(-1.0, 1.0);
    model->normalize_state(x0);
  }

  SimSettings st;
  st.t_max = t_max > 0 ? t_max : (model->id() == "uav" ? 120.0 : 30.0);
  const SimResult sim = simulate_closed_loop(*model, *policy, x0, st);
  std::cout << "termination: " << termination_name(sim.termination) << " at t=" << sim.t_final
            << "\n  cost " << sim.cost << ", final error " << sim.final_error << "\n";
  if (!out.empty()) {
    std::ostringstream oss;
    oss << "t";
    for (int i = 0; i < model->state_dim(); ++i) oss << ",x_" << i;
    for (int i = 0; i < model->control_dim(); ++i) oss << ",u_" << i;
    oss << "\n";
    for (std::size_t k = 0; k < sim.t.size(); ++k) {
      oss << format_double(sim.t[k]);
      for (int i = 0; i < model->state_dim(); ++i) oss << "," << format_double(sim.x[k][i]);
      for (int i = 0; i < model->control_dim(); ++i) oss << "," << format_double(sim.u[k][i]);
      oss << "\n";
    }
    write_text_file(out, oss.str());
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& mode, const std::string& model_cfg, const std::string& policy_file,
             int n, std::uint64_t seed, const std::string& out, const std::string& values_dir,
             double t_max, int workers, double radius, double scale) {
  auto model = load_model(model_cfg);
  auto policy = load_policy(policy_file, *model);
  nlohmann::json j;

  if (mode == "linear") {
    const EquilibriumResult eqr = find_closed_loop_equilibrium(*model, *policy, model->equilibrium().x_f);
    j["equilibrium_converged"] = eqr.converged;
    j["equilibrium_offset"] = eqr.offset;
    j["equilibrium_residual"] = eqr.residual;
    if (eqr.converged) {
      const Matrix A_cl = closed_loop_jacobian(*model, *policy, eqr.x_bar);
      j["abscissa"] = reduced_closed_loop_abscissa(*model, A_cl);
      j["abscissa_full"] = spectral_abscissa(A_cl);
    }
  } else if (mode == "mc") {
    SimSettings st;
    st.t_max = t_max > 0 ? t_max : (model->id() == "uav" ? 120.0 : 30.0);
    const SamplingDomain domain =
        (model->id() == "uav") ? SamplingDomain::uav_box(scale) : SamplingDomain::sphere(radius);
    const McStabilityReport stab = mc_stability(*model, *policy, domain, n, seed, st, workers);
    j["worst_case_failure"] = stab.worst_case_failure;
    j["n_mc"] = n;
    if (!out.empty())
      save_mc_runs_csv(stab.runs, std::filesystem::path(out).parent_path() / "runs.csv");
    if (!values_dir.empty()) {
      const Dataset values = load_dataset(values_dir);
      const McOptimalityReport opt = mc_optimality(*model, *policy, values.values, st, workers);
      j["suboptimality_median"] = opt.median;
      j["suboptimality_q1"] = opt.q1;
      j["suboptimality_q3"] = opt.q3;
      j["suboptimality_n"] = opt.suboptimality_pct.size();
      j["excluded_not_converged"] = opt.excluded_not_converged.size();
    }
  } else {
    std::cerr << "unknown eval mode '" << mode << "' (use linear|mc)\n";
    return 2;
  }

  const std::string text = j.dump(2) + "\n";
  if (!out.empty()) {
    write_text_file(out, text);
    std::cout << "wrote " << out << "\n";
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LQR-anchored neural feedback control toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int workers = 1;
  bool deterministic = false;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads")->capture_default_str();
  app.add_flag("--deterministic", deterministic, "force single-worker bit-deterministic mode");

  // trim
  auto* trim = app.add_subcommand("trim", "compute straight-and-level UAV trim");
  std::string trim_params;
  double trim_airspeed = 20.0;
  trim->add_option("--params", trim_params, "UAV parameter file (JSON)");
  trim->add_option("--airspeed", trim_airspeed, "airspeed in m/s")->capture_default_str();

  // lqr
  auto* lqrc = app.add_subcommand("lqr", "solve the Riccati design for a model");
  std::string lqr_model, lqr_out;
  lqrc->add_option("--model", lqr_model, "model config JSON")->required();
  lqrc->add_option("--out", lqr_out, "write LQR policy file");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate an open-loop optimal control dataset");
  std::string dg_model, dg_method = "indirect", dg_out;
  int dg_n = 16;
  double dg_radius = 1.2, dg_scale = 1.0;
  datagen->add_option("--model", dg_model, "model config JSON")->required();
  datagen->add_option("--method", dg_method, "indirect|direct")->capture_default_str();
  datagen->add_option("--n-traj", dg_n, "number of trajectories")->capture_default_str();
  datagen->add_option("--out", dg_out, "output directory")->required();
  datagen->add_option("--radius", dg_radius, "sampling radius (Burgers)")->capture_default_str();
  datagen->add_option("--domain-scale", dg_scale, "start box scale (UAV)")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "fit a policy checkpoint to a dataset");
  std::string tr_model, tr_data, tr_arch = "u_mat", tr_opt = "lbfgs", tr_out = "ckpt.json", tr_test;
  double tr_lr = 1e-3, tr_lambda = 0.0;
  int tr_batch = 256, tr_epochs = 1500;
  train->add_option("--model", tr_model, "model config JSON")->required();
  train->add_option("--data", tr_data, "training dataset directory")->required();
  train->add_option("--arch", tr_arch, "architecture kind")->capture_default_str();
  train->add_option("--optimizer", tr_opt, "adam|lbfgs")->capture_default_str();
  train->add_option("--lr", tr_lr, "learning rate")->capture_default_str();
  train->add_option("--batch", tr_batch, "batch size")->capture_default_str();
  train->add_option("--epochs", tr_epochs, "epochs (adam) / max iterations (lbfgs)")
      ->capture_default_str();
  train->add_option("--out", tr_out, "checkpoint output path")->capture_default_str();
  train->add_option("--test", tr_test, "test dataset directory (for RM-l2)");
  train->add_option("--lambda-weight", tr_lambda, "value-gradient loss weight")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "closed-loop simulation from an initial state");
  std::string sm_model, sm_policy, sm_x0, sm_out;
  double sm_perturb = 0.1, sm_tmax = -1.0;
  sim->add_option("--model", sm_model, "model config JSON")->required();
  sim->add_option("--policy", sm_policy, "policy checkpoint (or LQR policy file)")->required();
  sim->add_option("--x0", sm_x0, "comma-separated initial state");
  sim->add_option("--perturb", sm_perturb, "random perturbation scale about x_f")->capture_default_str();
  sim->add_option("--t-max", sm_tmax, "simulation horizon");
  sim->add_option("--out", sm_out, "trajectory CSV output");

  // eval
  auto* eval = app.add_subcommand("eval", "closed-loop certification tests");
  std::string ev_mode, ev_model, ev_policy, ev_out, ev_values;
  int ev_n = 100;
  double ev_tmax = -1.0, ev_radius = 1.2, ev_scale = 1.0;
  eval->add_option("mode", ev_mode, "linear|mc")->required();
  eval->add_option("--model", ev_model, "model config JSON")->required();
  eval->add_option("--policy", ev_policy, "policy file")->required();
  eval->add_option("--n", ev_n, "Monte Carlo run count")->capture_default_str();
  eval->add_option("--out", ev_out, "report JSON output");
  eval->add_option("--values", ev_values, "dataset directory with optimal costs (optimality test)");
  eval->add_option("--t-max", ev_tmax, "simulation horizon");
  eval->add_option("--radius", ev_radius, "sampling radius (Burgers)")->capture_default_str();
  eval->add_option("--domain-scale", ev_scale, "start box scale (UAV)")->capture_default_str();

  // run
  auto* runc = app.add_subcommand("run", "run a full experiment grid from a config");
  std::string run_config;
  runc->add_option("--config", run_config, "experiment config JSON")->required();

  // report
  auto* reportc = app.add_subcommand("report", "emit CSV tables from a run directory");
  std::string report_dir;
  reportc->add_option("--run", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (deterministic) workers = 1;

  try {
    if (trim->parsed()) return cmd_trim(trim_params, trim_airspeed);
    if (lqrc->parsed()) return cmd_lqr(lqr_model, lqr_out);
    if (datagen->parsed())
      return cmd_datagen(dg_model, dg_method, dg_n, seed, dg_out, workers, dg_radius, dg_scale);
    if (train->parsed())
      return cmd_train(tr_model, tr_data, tr_arch, tr_opt, tr_lr, tr_batch, tr_epochs, seed, tr_out,
                       tr_test, tr_lambda);
    if (sim->parsed()) return cmd_simulate(sm_model, sm_policy, sm_x0, sm_perturb, seed, sm_tmax, sm_out);
    if (eval->parsed())
      return cmd_eval(ev_mode, ev_model, ev_policy, ev_n, seed, ev_out, ev_values, ev_tmax, workers,
                      ev_radius, ev_scale);
    if (runc->parsed()) {
      qrnet::ExperimentConfig cfg = qrnet::ExperimentConfig::load(run_config);
      if (seed != 0) cfg.master_seed = seed;
      qrnet::RunOptions opts;
      opts.workers = workers;
      opts.deterministic = deterministic;
      const auto dir = qrnet::run_experiment(cfg, opts);
      qrnet::emit_report(dir);
      std::cout << "run complete: " << dir << "\n";
      return 0;
    }
    if (reportc->parsed()) {
      qrnet::emit_report(report_dir);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
