#pragma once

#include <filesystem>

#include "qrnet/io.hpp"

namespace qrnet {

// Config-driven experiment grid: for every (dataset size, trial, architecture)
// cell, generate or reuse the dataset, train, run the linear and Monte Carlo
// certification tests, and record artifacts under the run directory. Cells
// already present in the manifest with matching content hashes are skipped.
struct ExperimentConfig {
  std::filesystem::path model_config;
  std::vector<int> dataset_sizes;
  int trials = 10;
  std::vector<ArchitectureKind> architectures;

  // datagen
  std::string method = "indirect";
  SamplingDomain domain = SamplingDomain::sphere(1.2);
  int test_trajectories = 10;
  int max_records_per_traj = 256;

  // training
  TrainSpec train;

  // evaluation
  int n_mc = 20;
  double sim_t_max = 30.0;
  bool eval_optimality = true;

  std::filesystem::path out_dir;
  std::uint64_t master_seed = 0;

  static ExperimentConfig load(const std::filesystem::path& path);
  std::string canonical_json() const;  // hashed into the manifest
};

struct RunOptions {
  int workers = 1;
  bool deterministic = true;  // kept for the CLI surface; runs are seeded either way
};

// returns the run directory (== config.out_dir)
std::filesystem::path run_experiment(const ExperimentConfig& config, const RunOptions& options);

// emit cells.csv and summary.csv from a completed (or partial) run directory
void emit_report(const std::filesystem::path& run_dir);

}  // namespace qrnet
