#pragma once

#include <filesystem>
#include <memory>

#include "qrnet/burgers.hpp"
#include "qrnet/evaluation.hpp"
#include "qrnet/ocp.hpp"
#include "qrnet/training.hpp"
#include "qrnet/uav.hpp"

namespace qrnet {

// decimal text with 17 significant digits (round-trips IEEE doubles exactly)
std::string format_double(double v);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// --- model configuration -----------------------------------------------------
// {"model":"burgers", "n":..., "nu":..., ...} or
// {"model":"uav", "params_file":"aerosonde.json", "airspeed":20.0}
std::unique_ptr<DynamicsModel> load_model(const std::filesystem::path& config_path);
std::unique_ptr<DynamicsModel> load_model_json(const std::string& json_text,
                                               const std::filesystem::path& base_dir);

UavParams load_uav_params(const std::filesystem::path& path);
void save_uav_params(const UavParams& params, const std::filesystem::path& path);

// --- checkpoints ---------------------------------------------------------------
std::string checkpoint_to_json(const PolicyCheckpoint& ckpt);
PolicyCheckpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

// LQR baseline "checkpoint" (kind field "lqr"); loadable by the eval tools
void save_lqr_policy(const LqrSolution& sol, const EquilibriumPair& eq,
                     const std::filesystem::path& path);
// returns a policy from either an architecture checkpoint or an LQR file
std::unique_ptr<FeedbackPolicy> load_policy(const std::filesystem::path& path,
                                            const DynamicsModel& model);

// --- datasets -------------------------------------------------------------------
// directory layout: meta.json + points.csv + values.csv
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// --- reports ---------------------------------------------------------------------
std::string train_report_to_json(const TrainReport& report);
void save_mc_runs_csv(const std::vector<McRun>& runs, const std::filesystem::path& path);

}  // namespace qrnet
