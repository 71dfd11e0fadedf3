#include "qrnet/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

namespace qrnet {

using nlohmann::json;
namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  const json j = json::parse(read_text_file(path));
  ExperimentConfig cfg;
  fs::path base = path.parent_path();
  fs::path model = j.at("model").get<std::string>();
  cfg.model_config = model.is_relative() ? base / model : model;
  cfg.dataset_sizes = j.at("dataset_sizes").get<std::vector<int>>();
  cfg.trials = j.value("trials", 10);
  for (const auto& name : j.at("architectures")) cfg.architectures.push_back(parse_kind(name));

  if (j.contains("datagen")) {
    const json& d = j["datagen"];
    cfg.method = d.value("method", cfg.method);
    cfg.test_trajectories = d.value("test_trajectories", cfg.test_trajectories);
    cfg.max_records_per_traj = d.value("max_records_per_traj", cfg.max_records_per_traj);
    if (d.contains("domain")) {
      const json& dom = d["domain"];
      if (dom.value("kind", "sphere") == "sphere")
        cfg.domain = SamplingDomain::sphere(dom.value("radius", 1.2));
      else
        cfg.domain = SamplingDomain::uav_box(dom.value("scale", 1.0));
    }
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    cfg.train.optimizer = t.value("optimizer", cfg.train.optimizer);
    cfg.train.learning_rate = t.value("lr", cfg.train.learning_rate);
    cfg.train.batch_size = t.value("batch", cfg.train.batch_size);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.lbfgs_max_iters = t.value("lbfgs_max_iters", cfg.train.lbfgs_max_iters);
    cfg.train.lambda_loss_weight = t.value("lambda_loss_weight", cfg.train.lambda_loss_weight);
    if (t.contains("hidden")) cfg.train.hidden_widths = t["hidden"].get<std::vector<int>>();
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    cfg.n_mc = e.value("n_mc", cfg.n_mc);
    cfg.sim_t_max = e.value("t_max", cfg.sim_t_max);
    cfg.eval_optimality = e.value("optimality", cfg.eval_optimality);
    if (e.contains("domain")) {
      const json& dom = e["domain"];
      if (dom.value("kind", "sphere") == "sphere")
        cfg.domain = SamplingDomain::sphere(dom.value("radius", cfg.domain.radius));
      else
        cfg.domain = SamplingDomain::uav_box(dom.value("scale", cfg.domain.scale));
    }
  }
  fs::path out = j.at("out_dir").get<std::string>();
  cfg.out_dir = out.is_relative() ? base / out : out;
  cfg.master_seed = j.value("master_seed", 0ULL);
  return cfg;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["model"] = model_config.string();
  j["dataset_sizes"] = dataset_sizes;
  j["trials"] = trials;
  json archs = json::array();
  for (auto k : architectures) archs.push_back(kind_name(k));
  j["architectures"] = archs;
  j["method"] = method;
  j["domain"] = {{"kind", domain.kind == SamplingDomain::Kind::Sphere ? "sphere" : "uav_box"},
                 {"radius", domain.radius},
                 {"scale", domain.scale}};
  j["test_trajectories"] = test_trajectories;
  j["max_records_per_traj"] = max_records_per_traj;
  j["train"] = {{"optimizer", train.optimizer},
                {"lr", train.learning_rate},
                {"batch", train.batch_size},
                {"epochs", train.epochs},
                {"lbfgs_max_iters", train.lbfgs_max_iters},
                {"lambda_loss_weight", train.lambda_loss_weight},
                {"hidden", train.hidden_widths}};
  j["n_mc"] = n_mc;
  j["sim_t_max"] = sim_t_max;
  j["eval_optimality"] = eval_optimality;
  j["master_seed"] = master_seed;
  return j.dump();
}

namespace {

struct Manifest {
  json root;
  fs::path path;

  static Manifest open(const fs::path& run_dir, const std::string& config_hash) {
    Manifest m;
    m.path = run_dir / "manifest.json";
    if (fs::exists(m.path)) {
      m.root = json::parse(read_text_file(m.path));
      if (m.root.value("config_hash", "") != config_hash) {
        m.root = json::object();  // config changed: start a fresh manifest
      }
    }
    if (m.root.empty()) {
      m.root["config_hash"] = config_hash;
      m.root["cells"] = json::object();
    }
    return m;
  }

  bool cell_done(const std::string& key, const std::string& inputs_hash) const {
    if (!root["cells"].contains(key)) return false;
    const json& cell = root["cells"][key];
    if (cell.value("inputs_hash", "") != inputs_hash) return false;
    if (!cell.value("ok", false)) return false;
    for (const auto& f : cell["outputs"]) {
      const fs::path p = path.parent_path() / f.at("path").get<std::string>();
      if (!fs::exists(p)) return false;
      if (sha256_file(p) != f.at("sha256").get<std::string>()) return false;
    }
    return true;
  }

  void record(const std::string& key, const std::string& inputs_hash,
              const std::vector<fs::path>& outputs, bool ok, const std::string& error = "") {
    json cell;
    cell["inputs_hash"] = inputs_hash;
    cell["ok"] = ok;
    if (!error.empty()) cell["error"] = error;
    json outs = json::array();
    for (const auto& p : outputs) {
      outs.push_back({{"path", fs::relative(p, path.parent_path()).string()},
                      {"sha256", sha256_file(p)}});
    }
    cell["outputs"] = outs;
    root["cells"][key] = std::move(cell);
    write_text_file(path, root.dump(2) + "\n");
  }
};

json eval_policy_cell(const DynamicsModel& model, const FeedbackPolicy& policy,
                      const ExperimentConfig& cfg, std::uint64_t mc_seed,
                      const std::vector<std::pair<Vector, double>>& mc_values, int workers,
                      const fs::path& runs_csv) {
  SimSettings sim;
  sim.t_max = cfg.sim_t_max;

  // linear stability near x_f
  const EquilibriumResult eqr =
      find_closed_loop_equilibrium(model, policy, model.equilibrium().x_f);
  double abscissa = std::numeric_limits<double>::quiet_NaN();
  if (eqr.converged) {
    const Matrix A_cl = closed_loop_jacobian(model, policy, eqr.x_bar);
    abscissa = reduced_closed_loop_abscissa(model, A_cl);
  }

  const McStabilityReport stab =
      mc_stability(model, policy, cfg.domain, cfg.n_mc, mc_seed, sim, workers);
  save_mc_runs_csv(stab.runs, runs_csv);

  json j;
  j["equilibrium_converged"] = eqr.converged;
  j["equilibrium_offset"] = eqr.offset;
  j["equilibrium_residual"] = eqr.residual;
  j["abscissa"] = abscissa;
  j["worst_case_failure"] = stab.worst_case_failure;
  j["n_mc"] = cfg.n_mc;

  if (cfg.eval_optimality && !mc_values.empty()) {
    const McOptimalityReport opt = mc_optimality(model, policy, mc_values, sim, workers);
    j["suboptimality_median"] = opt.median;
    j["suboptimality_q1"] = opt.q1;
    j["suboptimality_q3"] = opt.q3;
    j["suboptimality_n"] = opt.suboptimality_pct.size();
    j["excluded_not_converged"] = opt.excluded_not_converged.size();
    j["excluded_bad_value"] = opt.excluded_bad_value.size();
  }
  return j;
}

}  // namespace

fs::path run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::string config_hash = sha256_hex(cfg.canonical_json());
  fs::create_directories(cfg.out_dir);
  Manifest manifest = Manifest::open(cfg.out_dir, config_hash);
  write_text_file(cfg.out_dir / "config.json", cfg.canonical_json() + "\n");

  auto model = load_model(cfg.model_config);
  const LqrSolution lqr = lqr_for_model(*model);

  DatagenSettings dg;
  dg.method = cfg.method;
  dg.domain = cfg.domain;
  dg.max_records_per_traj = cfg.max_records_per_traj;
  dg.workers = opts.workers;

  // ---- shared artifacts: test set, MC optimal values ----
  const std::uint64_t test_seed = derive_seed(cfg.master_seed, "test");
  const fs::path test_dir = cfg.out_dir / "datasets" / "test";
  const std::string test_hash = sha256_hex(config_hash + ":test");
  if (!manifest.cell_done("dataset/test", test_hash)) {
    const Dataset test = generate_dataset(*model, dg, cfg.test_trajectories, test_seed, lqr);
    save_dataset(test, test_dir);
    manifest.record("dataset/test", test_hash,
                    {test_dir / "meta.json", test_dir / "points.csv", test_dir / "values.csv"}, true);
  }
  Dataset test_data = load_dataset(test_dir);

  const std::uint64_t mc_seed = derive_seed(cfg.master_seed, "mc");
  std::vector<std::pair<Vector, double>> mc_values;
  if (cfg.eval_optimality) {
    const fs::path mcv_dir = cfg.out_dir / "datasets" / "mc_values";
    const std::string mcv_hash = sha256_hex(config_hash + ":mc_values");
    if (!manifest.cell_done("dataset/mc_values", mcv_hash)) {
      // optimal cost V(x0) for exactly the Monte Carlo initial conditions
      const auto x0s = sample_initial_conditions(*model, cfg.domain, cfg.n_mc,
                                                 derive_seed(mc_seed, "mc"));
      Dataset values_ds;
      values_ds.model_id = model->id();
      values_ds.method = cfg.method;
      values_ds.n_requested = cfg.n_mc;
      values_ds.seed = mc_seed;
      for (const auto& x0 : x0s) {
        ExtremalTrajectory tr;
        if (cfg.method == "indirect")
          tr = solve_open_loop_indirect(*model, x0, dg.indirect, lqr);
        else
          tr = solve_open_loop_direct(*model, x0, dg.direct, lqr);
        if (tr.converged) {
          ++values_ds.n_converged;
          values_ds.values.emplace_back(x0, tr.cost);
        } else {
          ++values_ds.n_discarded;
          values_ds.values.emplace_back(x0, -1.0);  // excluded downstream
        }
      }
      save_dataset(values_ds, mcv_dir);
      manifest.record("dataset/mc_values", mcv_hash,
                      {mcv_dir / "meta.json", mcv_dir / "points.csv", mcv_dir / "values.csv"}, true);
    }
    mc_values = load_dataset(mcv_dir).values;
  }

  // ---- LQR baseline ----
  {
    const fs::path cell_dir = cfg.out_dir / "lqr";
    const std::string hash = sha256_hex(config_hash + ":lqr");
    if (!manifest.cell_done("lqr", hash)) {
      fs::create_directories(cell_dir);
      save_lqr_policy(lqr, model->equilibrium(), cell_dir / "policy.json");
      LqrFeedbackPolicy policy(lqr_policy(lqr, model->equilibrium()));
      json j = eval_policy_cell(*model, policy, cfg, mc_seed, mc_values, opts.workers,
                                cell_dir / "runs.csv");
      j["riccati_residual"] = lqr.riccati_residual;
      j["design_abscissa"] = lqr.closed_loop_abscissa;
      write_text_file(cell_dir / "eval.json", j.dump(2) + "\n");
      manifest.record("lqr", hash,
                      {cell_dir / "policy.json", cell_dir / "eval.json", cell_dir / "runs.csv"}, true);
    }
  }

  // ---- grid cells ----
  for (std::size_t si = 0; si < cfg.dataset_sizes.size(); ++si) {
    const int size = cfg.dataset_sizes[si];
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const fs::path data_dir =
          cfg.out_dir / "datasets" / ("size_" + std::to_string(size)) / ("trial_" + std::to_string(trial));
      const std::string data_key =
          "dataset/size_" + std::to_string(size) + "/trial_" + std::to_string(trial);
      const std::string data_hash = sha256_hex(config_hash + ":" + data_key);
      const std::uint64_t data_seed =
          derive_seed(derive_seed(derive_seed(cfg.master_seed, "data"), si), trial);
      if (!manifest.cell_done(data_key, data_hash)) {
        try {
          const Dataset ds = generate_dataset(*model, dg, size, data_seed, lqr);
          save_dataset(ds, data_dir);
          manifest.record(data_key, data_hash,
                          {data_dir / "meta.json", data_dir / "points.csv", data_dir / "values.csv"},
                          true);
        } catch (const std::exception& e) {
          manifest.record(data_key, data_hash, {}, false, e.what());
          continue;
        }
      }
      Dataset train_data;
      try {
        train_data = load_dataset(data_dir);
      } catch (const std::exception&) {
        continue;
      }

      for (std::size_t ai = 0; ai < cfg.architectures.size(); ++ai) {
        const ArchitectureKind kind = cfg.architectures[ai];
        const std::string cell_key = "cell/size_" + std::to_string(size) + "/trial_" +
                                     std::to_string(trial) + "/" + kind_name(kind);
        const std::string cell_hash = sha256_hex(config_hash + ":" + cell_key);
        if (manifest.cell_done(cell_key, cell_hash)) continue;

        const fs::path cell_dir = cfg.out_dir / ("size_" + std::to_string(size)) /
                                  ("trial_" + std::to_string(trial)) / kind_name(kind);
        fs::create_directories(cell_dir);
        try {
          TrainSpec spec = cfg.train;
          spec.kind = kind;
          spec.seed = derive_seed(derive_seed(derive_seed(derive_seed(cfg.master_seed, "train"), si),
                                              trial),
                                  ai);
          auto [ckpt, report] = fit(spec, train_data, *model, lqr, &test_data);
          save_checkpoint(ckpt, cell_dir / "ckpt.json");
          write_text_file(cell_dir / "report.json", train_report_to_json(report));

          NnFeedbackPolicy policy(ckpt, *model);
          json j = eval_policy_cell(*model, policy, cfg, mc_seed, mc_values, opts.workers,
                                    cell_dir / "runs.csv");
          j["train_wall_time_s"] = report.wall_time_s;
          j["rm_l2"] = report.rm_l2;
          j["final_train_loss"] = report.final_train_loss;
          write_text_file(cell_dir / "eval.json", j.dump(2) + "\n");
          manifest.record(cell_key, cell_hash,
                          {cell_dir / "ckpt.json", cell_dir / "report.json", cell_dir / "eval.json",
                           cell_dir / "runs.csv"},
                          true);
        } catch (const std::exception& e) {
          manifest.record(cell_key, cell_hash, {}, false, e.what());
        }
      }
    }
  }
  return cfg.out_dir;
}

void emit_report(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / "manifest.json";
  require(fs::exists(manifest_path), "emit_report: no manifest in " + run_dir.string());
  const json manifest = json::parse(read_text_file(manifest_path));
  require(manifest.contains("cells") && !manifest["cells"].empty(),
          "emit_report: manifest lists no cells");

  struct Row {
    int size;
    int trial;
    std::string arch;
    json eval;
  };
  std::vector<Row> rows;
  for (const auto& [key, cell] : manifest["cells"].items()) {
    if (!cell.value("ok", false)) continue;
    fs::path eval_path;
    for (const auto& f : cell["outputs"]) {
      const std::string p = f.at("path").get<std::string>();
      if (p.size() >= 9 && p.substr(p.size() - 9) == "eval.json") eval_path = run_dir / p;
    }
    if (eval_path.empty()) continue;

    Row row;
    if (key == "lqr") {
      row.size = 0;
      row.trial = 0;
      row.arch = "lqr";
    } else if (key.rfind("cell/", 0) == 0) {
      // cell/size_<S>/trial_<T>/<arch>
      std::istringstream ss(key.substr(5));
      std::string part;
      std::getline(ss, part, '/');
      row.size = std::stoi(part.substr(5));
      std::getline(ss, part, '/');
      row.trial = std::stoi(part.substr(6));
      std::getline(ss, part, '/');
      row.arch = part;
    } else {
      continue;
    }
    row.eval = json::parse(read_text_file(eval_path));
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.size, a.arch, a.trial) < std::tie(b.size, b.arch, b.trial);
  });

  const std::vector<std::string> metrics = {"train_wall_time_s", "rm_l2",        "abscissa",
                                            "equilibrium_offset", "worst_case_failure",
                                            "suboptimality_median"};
  std::ostringstream cells;
  cells << "size,trial,arch";
  for (const auto& mname : metrics) cells << "," << mname;
  cells << "\n";
  for (const auto& row : rows) {
    cells << row.size << "," << row.trial << "," << row.arch;
    for (const auto& mname : metrics) {
      cells << ",";
      if (row.eval.contains(mname) && row.eval[mname].is_number())
        cells << format_double(row.eval[mname].get<double>());
    }
    cells << "\n";
  }
  write_text_file(run_dir / "cells.csv", cells.str());

  // summary: quantiles over trials per (size, arch, metric)
  std::map<std::pair<int, std::string>, std::map<std::string, std::vector<double>>> groups;
  for (const auto& row : rows) {
    for (const auto& mname : metrics) {
      if (row.eval.contains(mname) && row.eval[mname].is_number()) {
        const double v = row.eval[mname].get<double>();
        if (std::isfinite(v)) groups[{row.size, row.arch}][mname].push_back(v);
      }
    }
  }
  std::ostringstream summary;
  summary << "size,arch,metric,count,min,q1,median,q3,max\n";
  for (const auto& [gk, mm] : groups) {
    for (const auto& mname : metrics) {
      const auto it = mm.find(mname);
      if (it == mm.end() || it->second.empty()) continue;
      const std::vector<double>& v = it->second;
      summary << gk.first << "," << gk.second << "," << mname << "," << v.size() << ","
              << format_double(quantile(v, 0.0)) << "," << format_double(quantile(v, 0.25)) << ","
              << format_double(quantile(v, 0.5)) << "," << format_double(quantile(v, 0.75)) << ","
              << format_double(quantile(v, 1.0)) << "\n";
    }
  }
  write_text_file(run_dir / "summary.csv", summary.str());
}

}  // namespace qrnet
