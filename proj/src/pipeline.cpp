#include "mdac/pipeline.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/parallel.hpp"
#include "mdac/plot.hpp"
#include "mdac/rng.hpp"

namespace mdac {
namespace fs = std::filesystem;

namespace {

std::string two_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", i);
  return buf;
}

std::string wind_label(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  nlohmann::json meta = j;
  for (const char* block : {"ensemble", "collection", "evaluation", "paths"}) meta.erase(block);
  c.meta = meta_config_from_json(meta);
  try {
    if (j.contains("ensemble")) {
      const auto& e = j.at("ensemble");
      c.ensemble.steps = e.value("steps", c.ensemble.steps);
      c.ensemble.adam.lr = e.value("lr", c.ensemble.adam.lr);
      c.ensemble.hidden = e.value("hidden", c.ensemble.hidden);
    }
    if (j.contains("collection")) {
      const auto& e = j.at("collection");
      c.collection.horizon = e.value("T", c.collection.horizon);
      c.collection.dt = e.value("dt", c.collection.dt);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      c.evaluation.wind_speeds = e.value("wind_speeds", c.evaluation.wind_speeds);
      c.evaluation.reference = e.value("reference", c.evaluation.reference);
      c.evaluation.horizon = e.value("T_eval", c.evaluation.horizon);
      c.evaluation.dt = e.value("dt_eval", c.evaluation.dt);
    }
    if (j.contains("paths")) {
      const auto& e = j.at("paths");
      c.paths.data_dir = e.value("data_dir", c.paths.data_dir.string());
      c.paths.models_dir = e.value("models_dir", c.paths.models_dir.string());
      c.paths.reports_dir = e.value("reports_dir", c.paths.reports_dir.string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.paths.data_dir = resolve(base_dir, c.paths.data_dir);
  c.paths.models_dir = resolve(base_dir, c.paths.models_dir);
  c.paths.reports_dir = resolve(base_dir, c.paths.reports_dir);
  if (c.evaluation.wind_speeds.empty()) throw ConfigError("evaluation.wind_speeds is empty");
  for (double w : c.evaluation.wind_speeds)
    if (!(w >= 0.0)) throw ConfigError("wind speeds must be >= 0");
  if (c.evaluation.reference != "double_loop" && c.evaluation.reference != "spline")
    throw ConfigError("evaluation.reference must be \"double_loop\" or \"spline\"");
  if (c.ensemble.steps < 1 || !(c.ensemble.adam.lr > 0))
    throw ConfigError("ensemble.steps must be >= 1 and ensemble.lr > 0");
  try {
    steps_for(c.evaluation.horizon, c.evaluation.dt);
    steps_for(c.collection.horizon, c.collection.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return experiment_config_from_json(read_json(path), path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c.meta);
  j["ensemble"] = {{"steps", c.ensemble.steps},
                   {"lr", c.ensemble.adam.lr},
                   {"hidden", c.ensemble.hidden}};
  j["collection"] = {{"T", c.collection.horizon}, {"dt", c.collection.dt}};
  j["evaluation"] = {{"wind_speeds", c.evaluation.wind_speeds},
                     {"reference", c.evaluation.reference},
                     {"T_eval", c.evaluation.horizon},
                     {"dt_eval", c.evaluation.dt}};
  j["paths"] = {{"data_dir", c.paths.data_dir.string()},
                {"models_dir", c.paths.models_dir.string()},
                {"reports_dir", c.paths.reports_dir.string()}};
  return j;
}

Manifest read_manifest(const fs::path& path) {
  const nlohmann::json j = read_json(path);
  Manifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("tasks"))
      m.tasks.push_back({t.at("j").get<int>(), t.at("w").get<double>(),
                         t.at("seed").get<std::uint64_t>(), t.at("file").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad manifest " + path.string() + ": " + e.what());
  }
  return m;
}

Manifest collect_data(const ExperimentConfig& c, int threads) {
  Manifest m;
  m.seed = c.meta.seed;
  const std::vector<double> winds = sample_tasks(c.meta.seed, c.meta.M);
  for (int j = 0; j < c.meta.M; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    m.tasks.push_back({j, winds[sj], substream_seed(c.meta.seed, "collect", sj),
                       "task_" + two_digit(j) + ".csv"});
  }
  parallel_for(c.meta.M, threads, [&](int j) {
    const TaskEntry& t = m.tasks[static_cast<std::size_t>(j)];
    const TrajectoryDataset data =
        collect_trajectory(t.w, t.seed, c.collection.horizon, c.collection.dt);
    write_dataset_csv((c.paths.data_dir / t.file).string(), data);
  });
  nlohmann::json j;
  j["seed"] = m.seed;
  j["substreams"] = {{"tasks", "tasks"},
                     {"collection", "collect"},
                     {"surrogate_init", "surrogate-init"},
                     {"meta_references", "meta-reference"},
                     {"feature_init", "feature-init"},
                     {"gain_init", "gain-init"}};
  j["tasks"] = nlohmann::json::array();
  for (const TaskEntry& t : m.tasks)
    j["tasks"].push_back({{"j", t.index}, {"w", t.w}, {"seed", t.seed}, {"file", t.file}});
  write_text_file(c.paths.data_dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

EnsembleSummary fit_ensemble(const ExperimentConfig& c, int threads) {
  const Manifest m = read_manifest(c.paths.data_dir / "manifest.json");
  EnsembleSummary out;
  out.fits.resize(m.tasks.size());
  parallel_for(static_cast<int>(m.tasks.size()), threads, [&](int j) {
    const auto sj = static_cast<std::size_t>(j);
    const TrajectoryDataset data =
        read_dataset_csv((c.paths.data_dir / m.tasks[sj].file).string());
    out.fits[sj] = fit_surrogate(data, substream_seed(m.seed, "surrogate-init", sj), c.ensemble);
    write_text_file(c.paths.models_dir / ("surrogate_" + two_digit(j) + ".json"),
                    to_json(out.fits[sj].params, 0).dump(1) + "\n");
  });
  std::ostringstream os;
  os << "j,w,initial_loss,zero_network_loss,final_loss\n";
  for (std::size_t j = 0; j < m.tasks.size(); ++j) {
    os << j << ',' << fmt17(m.tasks[j].w) << ',' << fmt17(out.fits[j].initial_loss) << ','
       << fmt17(out.fits[j].zero_network_loss) << ',' << fmt17(out.fits[j].best_loss) << '\n';
  }
  write_text_file(c.paths.reports_dir / "fit_report.csv", os.str());
  return out;
}

std::vector<MlpParams> load_surrogates(const ExperimentConfig& c, const Manifest& m) {
  std::vector<MlpParams> out;
  for (std::size_t j = 0; j < m.tasks.size(); ++j) {
    const fs::path p = c.paths.models_dir / ("surrogate_" + two_digit(static_cast<int>(j)) + ".json");
    out.push_back(mlp_from_json(read_json(p)));
  }
  return out;
}

std::string run_tag(bool learn_p) { return learn_p ? "learn_p" : "fixed_p"; }

TrainResult meta_train(const ExperimentConfig& c, bool learn_p, double fixed_p,
                       const std::optional<fs::path>& candidate, int threads, bool verbose) {
  MetaConfig mc = c.meta;
  mc.learn_p = learn_p;
  if (!learn_p) mc.p_init = fixed_p;
  if (!(mc.p_init > kPFloor)) throw ConfigError("p must exceed 1 + delta_p");
  const Manifest m = read_manifest(c.paths.data_dir / "manifest.json");
  if (static_cast<int>(m.tasks.size()) != mc.M)
    throw ConfigError("manifest task count differs from M; rerun collect-data");
  std::vector<double> winds;
  for (const TaskEntry& t : m.tasks) winds.push_back(t.w);
  const std::vector<MetaTask> tasks = make_meta_dataset(mc.seed, winds, mc.N, mc.T);
  std::vector<MlpParams> surrogates;
  if (mc.dynamics == "surrogate") surrogates = load_surrogates(c, m);

  std::vector<MetaParams> candidates;
  if (candidate && fs::exists(*candidate)) {
    MetaParams cand = checkpoint_from_json(read_json(*candidate));
    if (cand.p() == mc.p_init) candidates.push_back(cand);
  }
  auto on_step = [&](const HistoryRow& r) {
    if (verbose)
      std::cerr << run_tag(learn_p) << " step " << r.step << " meta_loss " << r.meta_loss
                << " p " << r.decoded_p << "\n";
  };
  TrainResult result = train(mc, tasks, surrogates, candidates, threads, on_step);

  nlohmann::json ck = checkpoint_json(result.best);
  ck["meta_loss"] = result.best_loss;
  ck["best_step"] = result.best_step;
  ck["skipped_steps"] = result.skipped_steps;
  ck["config"] = to_json(mc);
  write_text_file(c.paths.models_dir / ("checkpoint_" + run_tag(learn_p) + ".json"),
                  ck.dump(1) + "\n");
  write_text_file(c.paths.reports_dir / ("history_" + run_tag(learn_p) + ".csv"),
                  history_csv(result.history));
  return result;
}

std::unique_ptr<RefTrajectory> evaluation_reference(const ExperimentConfig& c) {
  if (c.evaluation.reference == "spline")
    return random_reference(substream_seed(c.meta.seed, "eval-reference"), c.evaluation.horizon);
  return std::make_unique<DoubleLoop>(c.evaluation.horizon);
}

std::string evaluation_csv(const std::vector<EvaluationRow>& rows) {
  std::ostringstream os;
  os << "w,rms,in_distribution,diverged\n";
  for (const auto& r : rows)
    os << fmt17(r.w) << ',' << fmt17(r.rms) << ',' << (r.in_distribution ? "yes" : "no") << ','
       << (r.diverged ? 1 : 0) << '\n';
  return os.str();
}

std::string comparison_csv(const std::vector<EvaluationRow>& fixed_p,
                           const std::vector<EvaluationRow>& learn_p) {
  if (fixed_p.size() != learn_p.size())
    throw std::invalid_argument("evaluations cover different wind speeds");
  std::ostringstream os;
  os << "w,fixed_p_rms,learn_p_rms,in_distribution\n";
  for (std::size_t i = 0; i < fixed_p.size(); ++i)
    os << fmt17(fixed_p[i].w) << ',' << fmt17(fixed_p[i].rms) << ',' << fmt17(learn_p[i].rms)
       << ',' << (fixed_p[i].in_distribution ? "yes" : "no") << '\n';
  return os.str();
}

std::string phase_plot(const Trajectory& traj, const std::string& title) {
  Series ref{"reference", "#1f77b4", {}, {}, true};
  Series act{"actual", "#d62728", {}, {}, false};
  for (int i = 0; i < traj.samples(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    ref.x.push_back(traj.q_r[si][0]);
    ref.y.push_back(traj.q_r[si][1]);
    act.x.push_back(traj.q[si][0]);
    act.y.push_back(traj.q[si][1]);
  }
  return render_svg({Panel{title, "x [m]", "y [m]", {ref, act}, true}});
}

std::string state_plot(const Trajectory& traj, const std::string& title) {
  const char* names[3] = {"x [m]", "y [m]", "phi [rad]"};
  std::vector<Panel> panels;
  for (int k = 0; k < 3; ++k) {
    Series ref{"reference", "#1f77b4", traj.t, {}, true};
    Series act{"actual", "#d62728", traj.t, {}, false};
    for (int i = 0; i < traj.samples(); ++i) {
      const auto si = static_cast<std::size_t>(i);
      ref.y.push_back(traj.q_r[si][k]);
      act.y.push_back(traj.q[si][k]);
    }
    panels.push_back(Panel{k == 0 ? title : "", "t [s]", names[k], {ref, act}, false});
  }
  return render_svg(panels, 640, 240);
}

std::vector<EvaluationRow> evaluate(const ExperimentConfig& c, const fs::path& checkpoint,
                                    const std::vector<double>& winds, int threads) {
  if (winds.empty()) throw ConfigError("no wind speeds to evaluate");
  const MetaParams theta = checkpoint_from_json(read_json(checkpoint));
  const ControllerConfig controller = theta.controller();
  const std::unique_ptr<RefTrajectory> ref = evaluation_reference(c);
  std::string name = checkpoint.stem().string();
  if (name.rfind("checkpoint_", 0) == 0) name = name.substr(11);

  std::vector<EvaluationRow> rows(winds.size());
  parallel_for(static_cast<int>(winds.size()), threads, [&](int i) {
    const auto si = static_cast<std::size_t>(i);
    EvaluationRow& row = rows[si];
    row.w = winds[si];
    row.in_distribution = row.w <= kInDistributionWind;
    const PlanarQuadrotor quad;
    const WindDrag wd{row.w};
    const DisturbanceFn drag = [wd](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
      return wind_drag(q, qd, wd);
    };
    try {
      const Trajectory traj =
          rollout(quad, drag, controller, *ref, c.evaluation.horizon, c.evaluation.dt);
      row.rms = rms(traj);
      const std::string stem = name + "_w" + wind_label(row.w);
      const std::string title = name + ", w = " + wind_label(row.w) + " m/s";
      write_text_file(c.paths.reports_dir / (stem + "_phase.svg"), phase_plot(traj, title));
      write_text_file(c.paths.reports_dir / (stem + "_states.svg"), state_plot(traj, title));
    } catch (const NumericalError&) {
      row.diverged = true;
      row.rms = std::numeric_limits<double>::infinity();
    }
  });
  write_text_file(c.paths.reports_dir / ("evaluation_" + name + ".csv"), evaluation_csv(rows));
  return rows;
}

}  // namespace mdac
