// Command-line front end: collect-data, fit-ensemble, meta-train, evaluate,
// pipeline, oracle-rollout and verify.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical
// failure, 3 verification failure.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdac/diffengine.hpp"
#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/parallel.hpp"
#include "mdac/pipeline.hpp"
#include "mdac/verify.hpp"

namespace fs = std::filesystem;
using namespace mdac;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config JSON");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the root seed");
  cmd->add_option("--threads", c.threads, "worker threads (default: MDAC_THREADS or 1)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_experiment_config(c.config);
  if (c.seed) cfg.meta.seed = *c.seed;
  return cfg;
}

std::vector<double> parse_winds(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad wind speed list: " + s);
    }
  }
  if (out.empty()) throw ConfigError("empty wind speed list");
  return out;
}

void print_rows(const std::string& name, const std::vector<EvaluationRow>& rows) {
  std::cout << name << "\n" << evaluation_csv(rows);
}

// Runs both evaluations and writes the side-by-side table when one learnable
// and one fixed checkpoint are given.
int run_evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints,
                 const std::vector<double>& winds, int threads) {
  std::optional<std::vector<EvaluationRow>> fixed, learned;
  bool diverged = false;
  for (const std::string& ck : checkpoints) {
    const std::vector<EvaluationRow> rows = evaluate(cfg, ck, winds, threads);
    print_rows(ck, rows);
    for (const auto& r : rows) diverged = diverged || r.diverged;
    const MetaParams theta =
        checkpoint_from_json(nlohmann::json::parse(read_text_file(ck)));
    (theta.learn_p ? learned : fixed) = rows;
  }
  if (fixed && learned)
    write_text_file(cfg.paths.reports_dir / "table1.csv", comparison_csv(*fixed, *learned));
  if (diverged) {
    std::cerr << "error: at least one evaluation rollout diverged\n";
    return kExitNumerical;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Meta-learned mirror-descent adaptive control of a planar quadrotor"};
  app.require_subcommand(1);

  Common collect_opts;
  auto* collect = app.add_subcommand("collect-data", "simulate PID trajectories per task");
  add_common(collect, collect_opts);

  Common fit_opts;
  auto* fit = app.add_subcommand("fit-ensemble", "fit one surrogate disturbance model per task");
  add_common(fit, fit_opts);

  Common train_opts;
  bool learn_p = false;
  double fixed_p = 2.0;
  std::string candidate;
  bool verbose = false;
  auto* train_cmd = app.add_subcommand("meta-train", "meta-train the controller");
  add_common(train_cmd, train_opts);
  auto* learn_flag = train_cmd->add_flag("--learn-p", learn_p, "learn the potential exponent");
  auto* fixed_flag =
      train_cmd->add_option("--fixed-p", fixed_p, "freeze the exponent at this value");
  learn_flag->excludes(fixed_flag);
  train_cmd->add_option("--candidate", candidate,
                        "fixed-p checkpoint also scored by a learnable-p run "
                        "(default: models_dir/checkpoint_fixed_p.json)");
  train_cmd->add_flag("--verbose", verbose, "print the loss at every step");

  Common eval_opts;
  std::vector<std::string> checkpoints;
  std::string winds_arg;
  auto* eval = app.add_subcommand("evaluate", "track the evaluation reference under true wind");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoints, "checkpoint JSON (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--winds", winds_arg, "comma-separated wind speeds (default from config)");

  Common all_opts;
  auto* pipeline = app.add_subcommand(
      "pipeline", "collect-data, fit-ensemble, meta-train fixed and learnable p, evaluate");
  add_common(pipeline, all_opts);
  pipeline->add_flag("--verbose", verbose, "print the loss at every step");

  std::string oracle_config;
  std::string out_path;
  int oracle_threads = 0;
  auto* oracle = app.add_subcommand("oracle-rollout",
                                    "closed loop with oracle features and a known parameter");
  oracle->add_option("--oracle-config", oracle_config, "oracle setup JSON")
      ->required()
      ->check(CLI::ExistingFile);
  oracle->add_option("--out", out_path, "trajectory CSV")->required();
  oracle->add_option("--threads", oracle_threads, "unused; accepted for uniformity");

  std::string trajectory_path;
  std::string report_path;
  auto* verify = app.add_subcommand("verify", "Lyapunov and ultimate-bound checks");
  verify->add_option("--trajectory", trajectory_path, "trajectory CSV")
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--oracle-config", oracle_config, "oracle setup JSON")
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--out", report_path, "stability report JSON (default: stdout)");
  verify->add_option("--threads", oracle_threads, "unused; accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*collect) {
    const ExperimentConfig cfg = load(collect_opts);
    const Manifest m = collect_data(cfg, resolve_threads(collect_opts.threads));
    std::cout << "wrote " << m.tasks.size() << " task trajectories to "
              << cfg.paths.data_dir.string() << "\n";
    return 0;
  }
  if (*fit) {
    const ExperimentConfig cfg = load(fit_opts);
    const EnsembleSummary s = fit_ensemble(cfg, resolve_threads(fit_opts.threads));
    for (std::size_t j = 0; j < s.fits.size(); ++j)
      std::cout << "task " << j << " one_step_loss " << s.fits[j].best_loss << " (zero network "
                << s.fits[j].zero_network_loss << ")\n";
    return 0;
  }
  if (*train_cmd) {
    const ExperimentConfig cfg = load(train_opts);
    std::optional<fs::path> cand;
    if (learn_p)
      cand = candidate.empty() ? cfg.paths.models_dir / "checkpoint_fixed_p.json"
                               : fs::path(candidate);
    const TrainResult r = meta_train(cfg, learn_p, fixed_p, cand,
                                     resolve_threads(train_opts.threads), verbose);
    std::cout << run_tag(learn_p) << " best meta_loss " << fmt17(r.best_loss) << " p "
              << fmt17(r.best.p()) << " skipped " << r.skipped_steps << "\n";
    return 0;
  }
  if (*eval) {
    const ExperimentConfig cfg = load(eval_opts);
    const std::vector<double> winds =
        winds_arg.empty() ? cfg.evaluation.wind_speeds : parse_winds(winds_arg);
    return run_evaluate(cfg, checkpoints, winds, resolve_threads(eval_opts.threads));
  }
  if (*pipeline) {
    const ExperimentConfig cfg = load(all_opts);
    const int threads = resolve_threads(all_opts.threads);
    collect_data(cfg, threads);
    fit_ensemble(cfg, threads);
    const fs::path fixed_ck = cfg.paths.models_dir / "checkpoint_fixed_p.json";
    const TrainResult fr = meta_train(cfg, false, cfg.meta.p_init, std::nullopt, threads, verbose);
    const TrainResult lr = meta_train(cfg, true, cfg.meta.p_init, fixed_ck, threads, verbose);
    std::cout << "fixed_p meta_loss " << fmt17(fr.best_loss) << "\nlearn_p meta_loss "
              << fmt17(lr.best_loss) << " p " << fmt17(lr.best.p()) << "\n";
    return run_evaluate(cfg,
                        {fixed_ck.string(), (cfg.paths.models_dir / "checkpoint_learn_p.json").string()},
                        cfg.evaluation.wind_speeds, threads);
  }
  if (*oracle) {
    const OracleSetup setup =
        oracle_setup_from_json(nlohmann::json::parse(read_text_file(oracle_config)));
    const Trajectory traj = run_oracle(setup);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    write_text_file(out_path, os.str());
    std::cout << "final tracking error "
              << (traj.q.back() - traj.q_r.back()).norm() << "\n";
    return 0;
  }
  if (*verify) {
    const OracleSetup setup =
        oracle_setup_from_json(nlohmann::json::parse(read_text_file(oracle_config)));
    const Trajectory traj = read_trajectory_csv(trajectory_path);
    const PlanarQuadrotor quad;
    const StabilityReport r =
        stability_report(traj, quad, setup.a(), setup.delta, setup.gains(), setup.pp);
    const std::string text = to_json(r).dump(1) + "\n";
    if (report_path.empty()) {
      std::cout << text;
    } else {
      write_text_file(report_path, text);
    }
    const int allowed = setup.delta == 0.0 ? 0 : static_cast<int>(0.01 * r.v.size());
    std::cerr << "violations " << r.violations << " radius " << r.radius << " contained "
              << (r.contained ? "yes" : "no") << " entry_time " << r.entry_time << "\n";
    return r.contained && r.violations <= allowed ? 0 : kExitVerification;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ad::NonFiniteError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
