#pragma once

// End-to-end experiment steps shared by the command-line tool and the
// benchmark: data collection, surrogate fitting, meta-training and
// evaluation on the true wind-drag quadrotor. Every step reads and writes
// files under the configured directories and is deterministic given the
// configuration.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdac/ensemble.hpp"
#include "mdac/metatrain.hpp"
#include "mdac/simulate.hpp"

namespace mdac {

/// Wind speeds up to this value are covered by the training distribution.
inline constexpr double kInDistributionWind = 6.0;

struct EvaluationConfig {
  std::vector<double> wind_speeds{2.0, 4.0, 6.0, 8.0, 10.0};
  std::string reference = "double_loop";
  double horizon = 10.0;
  double dt = 0.02;
};

struct CollectionConfig {
  double horizon = kEnsembleHorizon;
  double dt = kEnsembleDt;
};

struct PathsConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path models_dir = "models";
  std::filesystem::path reports_dir = "reports";
};

struct ExperimentConfig {
  MetaConfig meta;
  EnsembleConfig ensemble;
  CollectionConfig collection;
  EvaluationConfig evaluation;
  PathsConfig paths;
};

/// Meta-training fields sit at the top level next to the "ensemble",
/// "collection", "evaluation" and "paths" blocks. Relative paths are resolved
/// against `base_dir`. Throws ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

struct TaskEntry {
  int index = 0;
  double w = 0.0;
  std::uint64_t seed = 0;
  std::string file;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<TaskEntry> tasks;
};

Manifest read_manifest(const std::filesystem::path& path);

/// Draws the task winds, simulates one PID trajectory per task and writes
/// data_dir/task_XX.csv plus data_dir/manifest.json.
Manifest collect_data(const ExperimentConfig& c, int threads);

struct EnsembleSummary {
  std::vector<SurrogateFit> fits;
};

/// Fits one surrogate per manifest task; writes models_dir/surrogate_XX.json
/// and reports_dir/fit_report.csv.
EnsembleSummary fit_ensemble(const ExperimentConfig& c, int threads);

std::vector<MlpParams> load_surrogates(const ExperimentConfig& c, const Manifest& m);

/// Name of the checkpoint written by a run: "learn_p" or "fixed_p".
std::string run_tag(bool learn_p);

/// Meta-trains against the fitted surrogates (or the true drag when the
/// config says so). A learnable-p run also scores the fixed-p checkpoint
/// found at `candidate` and keeps whichever is better. Writes
/// models_dir/checkpoint_<tag>.json and reports_dir/history_<tag>.csv.
TrainResult meta_train(const ExperimentConfig& c, bool learn_p, double fixed_p,
                       const std::optional<std::filesystem::path>& candidate, int threads,
                       bool verbose = false);

struct EvaluationRow {
  double w = 0.0;
  double rms = 0.0;
  bool in_distribution = false;
  bool diverged = false;
};

std::unique_ptr<RefTrajectory> evaluation_reference(const ExperimentConfig& c);

/// True wind-drag closed loop under the checkpoint's controller at each wind
/// speed. Writes reports_dir/evaluation_<name>.csv and phase and state plots.
std::vector<EvaluationRow> evaluate(const ExperimentConfig& c,
                                    const std::filesystem::path& checkpoint,
                                    const std::vector<double>& winds, int threads);

std::string evaluation_csv(const std::vector<EvaluationRow>& rows);

/// Side-by-side table of two evaluations (w, fixed-p, learn-p, flag).
std::string comparison_csv(const std::vector<EvaluationRow>& fixed_p,
                           const std::vector<EvaluationRow>& learn_p);

std::string phase_plot(const Trajectory& traj, const std::string& title);
std::string state_plot(const Trajectory& traj, const std::string& title);

}  // namespace mdac
