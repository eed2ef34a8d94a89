#include "mdac/metatrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/parallel.hpp"
#include "mdac/rng.hpp"

namespace mdac {

nlohmann::json to_json(const MetaConfig& c) {
  return {{"seed", c.seed},       {"M", c.M},
          {"N", c.N},             {"T", c.T},
          {"dt", c.dt},           {"mu_ctrl", c.mu_ctrl},
          {"mu_meta", c.mu_meta}, {"steps", c.steps},
          {"lr", c.lr},           {"d", c.d},
          {"learn_p", c.learn_p}, {"p_init", c.p_init},
          {"epsilon", c.epsilon}, {"architecture", c.architecture},
          {"dynamics", c.dynamics}};
}

MetaConfig meta_config_from_json(const nlohmann::json& j) {
  MetaConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.M = j.value("M", c.M);
    c.N = j.value("N", c.N);
    c.T = j.value("T", c.T);
    c.dt = j.value("dt", c.dt);
    c.mu_ctrl = j.value("mu_ctrl", c.mu_ctrl);
    c.mu_meta = j.value("mu_meta", c.mu_meta);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.d = j.value("d", c.d);
    c.learn_p = j.value("learn_p", c.learn_p);
    c.p_init = j.value("p_init", c.p_init);
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("architecture")) {
      const auto& a = j.at("architecture");
      c.architecture = a.is_object() ? a.at("hidden").get<std::vector<int>>()
                                     : a.get<std::vector<int>>();
    }
    c.dynamics = j.value("dynamics", c.dynamics);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad meta-training config: ") + e.what());
  }
  if (c.M < 1 || c.N < 1 || c.d < 1 || c.steps < 0)
    throw ConfigError("M, N, d must be >= 1 and steps >= 0");
  if (!(c.lr > 0) || !(c.mu_ctrl >= 0) || !(c.mu_meta >= 0) || !(c.epsilon >= 0))
    throw ConfigError("lr must be > 0 and mu_ctrl, mu_meta, epsilon >= 0");
  if (!(c.p_init > kPFloor)) throw ConfigError("p_init must exceed 1 + delta_p");
  if (c.dynamics != "surrogate" && c.dynamics != "true")
    throw ConfigError("dynamics must be \"surrogate\" or \"true\"");
  try {
    steps_for(c.T, c.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int h : c.architecture)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
  return c;
}

double decode_p(double raw_p, double p_init) {
  return kPFloor + (p_init - kPFloor) * std::exp(raw_p);
}

int MetaParams::num_params() const { return offset_gain_p() + d; }

Eigen::VectorXd MetaParams::flatten() const {
  Eigen::VectorXd flat(num_params());
  flat.segment(0, offset_raw_p()) = theta_y.flatten();
  flat[offset_raw_p()] = raw_p;
  flat.segment(offset_lambda(), 3) = raw_lambda;
  flat.segment(offset_k(), 3) = raw_k;
  flat.segment(offset_gain_p(), d) = raw_gain_p;
  return flat;
}

void MetaParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("meta parameter length mismatch");
  theta_y = MlpParams::unflatten(theta_y.arch, flat.segment(0, offset_raw_p()), theta_y.seed);
  raw_p = flat[offset_raw_p()];
  raw_lambda = flat.segment(offset_lambda(), 3);
  raw_k = flat.segment(offset_k(), 3);
  raw_gain_p = flat.segment(offset_gain_p(), d);
}

double MetaParams::p() const { return learn_p ? decode_p(raw_p, p_init) : p_init; }

Gains MetaParams::gains() const { return Gains{raw_lambda, raw_k, raw_gain_p}; }

ControllerConfig MetaParams::controller() const {
  const MlpParams net = theta_y;
  const int dd = d;
  return ControllerConfig{
      gains(), potential(),
      [net, dd](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
        return feature_net(net, q, qd, dd);
      },
      d};
}

MetaParams init_meta_params(const MetaConfig& config) {
  MetaParams m;
  m.d = config.d;
  m.learn_p = config.learn_p;
  m.p_init = config.p_init;
  m.epsilon = config.epsilon;
  m.theta_y = init_mlp(substream_seed(config.seed, "feature-init"),
                       feature_architecture(config.d, config.architecture));
  Rng rng = make_rng(config.seed, "gain-init");
  std::normal_distribution<double> normal(0.0, 0.1);
  auto draw = [&](int n, double center) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = std::log(center) + normal(rng);
    return v;
  };
  m.raw_lambda = draw(3, 2.0);
  m.raw_k = draw(3, 4.0);
  m.raw_gain_p = draw(config.d, 1.0);
  m.raw_p = 0.0;
  return m;
}

std::vector<double> sample_tasks(std::uint64_t seed, int M) {
  if (M < 1) throw std::invalid_argument("sample_tasks needs M >= 1");
  Rng rng = make_rng(seed, "tasks");
  std::gamma_distribution<double> ga(5.0, 1.0);
  std::gamma_distribution<double> gb(9.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(M));
  for (auto& x : w) {
    const double a = ga(rng);
    const double b = gb(rng);
    x = 6.0 * a / (a + b);
  }
  return w;
}

std::vector<MetaTask> make_meta_dataset(std::uint64_t seed, const std::vector<double>& winds,
                                        int N, double T) {
  std::vector<MetaTask> tasks;
  for (std::size_t j = 0; j < winds.size(); ++j) {
    MetaTask task;
    task.w = winds[j];
    for (int i = 0; i < N; ++i) {
      const auto index = static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(N) +
                         static_cast<std::uint64_t>(i);
      task.refs.push_back(random_reference(substream_seed(seed, "meta-reference", index), T));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

ad::Var task_loss_tape(const ad::Var& flat, const MetaParams& layout, const MetaTask& task,
                       const MlpParams* surrogate, const MetaConfig& config) {
  using ad::Var;
  ad::Tape& tape = *flat.tape();
  const int b = static_cast<int>(task.refs.size());
  const int d = layout.d;
  const Architecture arch = layout.theta_y.arch;

  BatchProblem<Var> prob;
  prob.gains.lambda = broadcast_rows(vexp(slice(flat, layout.offset_lambda(), 3)), b);
  prob.gains.k = broadcast_rows(vexp(slice(flat, layout.offset_k(), 3)), b);
  prob.gains.p_gain = broadcast_rows(vexp(slice(flat, layout.offset_gain_p(), d)), b);
  prob.gains.p_sq = emul(prob.gains.p_gain, prob.gains.p_gain);
  prob.gains.exponent =
      layout.learn_p
          ? (layout.p_init - kPFloor) * vexp(slice(flat, layout.offset_raw_p(), 1)) + kPFloor
          : tape.constant(layout.p_init);
  prob.gains.epsilon = layout.epsilon;
  prob.gains.d = d;
  prob.gains.batch = b;
  prob.features = [&flat, arch, b](const Var& q, const Var& qd) {
    return mlp_forward(flat, 0, arch, cat(q, qd), b);
  };
  if (surrogate != nullptr) {
    const TapeMlp net(tape, *surrogate);
    prob.disturbance = [net, b](const Var& q, const Var& qd) { return net(cat(q, qd), b); };
  } else {
    const WindDrag wd{task.w};
    prob.disturbance = [wd, b](const Var& q, const Var& qd) {
      return wind_drag_batch(q, qd, wd, b);
    };
  }
  for (const auto& r : task.refs) prob.refs.push_back(r.get());
  prob.horizon = config.T;
  prob.dt = config.dt;

  const Var x0 = tape.constant(batch_initial_state(prob.refs, d));
  const Var xf = batch_rollout(x0, prob);
  return batch_task_loss(xf, b, config.T, config.mu_ctrl);
}

MetaEvaluation meta_loss(const MetaParams& theta, const std::vector<MetaTask>& tasks,
                         const std::vector<MlpParams>& surrogates, const MetaConfig& config,
                         bool with_gradient, int threads) {
  const bool use_surrogates = config.dynamics == "surrogate";
  if (use_surrogates && surrogates.size() != tasks.size())
    throw std::invalid_argument("need one surrogate per task");
  const Eigen::VectorXd flat = theta.flatten();
  const int m = static_cast<int>(tasks.size());
  std::vector<double> losses(static_cast<std::size_t>(m));
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(m));
  std::vector<char> diverged(static_cast<std::size_t>(m), 0);

  parallel_for(m, threads, [&](int j) {
    const auto sj = static_cast<std::size_t>(j);
    thread_local ad::Tape tape;
    tape.clear();
    const ad::Var x = tape.leaf(flat);
    try {
      const ad::Var loss = task_loss_tape(x, theta, tasks[sj],
                                          use_surrogates ? &surrogates[sj] : nullptr, config);
      losses[sj] = loss.scalar();
      if (with_gradient) {
        tape.backward(loss);
        const auto g = tape.adjoint(x.id());
        grads[sj] = Eigen::Map<const Eigen::VectorXd>(g.data(), flat.size());
      }
    } catch (const RolloutDiverged&) {
      diverged[sj] = 1;
    } catch (const ad::NonFiniteError&) {
      diverged[sj] = 1;
    }
    if (diverged[sj]) {
      losses[sj] = kDivergencePenalty;
      if (with_gradient) grads[sj] = Eigen::VectorXd::Zero(flat.size());
    }
  });

  MetaEvaluation ev;
  double total = 0.0;
  for (int j = 0; j < m; ++j) total += losses[static_cast<std::size_t>(j)];
  ev.loss = total / m + config.mu_meta * flat.squaredNorm();
  ev.task_losses = losses;
  ev.diverged = static_cast<int>(std::count(diverged.begin(), diverged.end(), 1));
  if (with_gradient) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(flat.size());
    for (int j = 0; j < m; ++j) g += grads[static_cast<std::size_t>(j)];
    ev.gradient = g / m + 2.0 * config.mu_meta * flat;
  }
  return ev;
}

bool meta_step(MetaParams& theta, Eigen::VectorXd grad, Adam& optimizer) {
  if (!theta.learn_p) grad[theta.offset_raw_p()] = 0.0;
  if (!grad.allFinite()) return false;
  Eigen::VectorXd flat = theta.flatten();
  optimizer.step(flat, grad);
  theta.assign(flat);
  return true;
}

namespace {

HistoryRow history_row(int step, double loss, const MetaParams& theta) {
  const Gains g = theta.gains();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Eigen::VectorXd& v : {g.lambda(), g.k(), g.p()}) {
    lo = std::min(lo, v.minCoeff());
    hi = std::max(hi, v.maxCoeff());
  }
  return {step, loss, theta.p(), lo, hi};
}

}  // namespace

TrainResult train_from(const MetaParams& init, const MetaConfig& config,
                       const std::vector<MetaTask>& tasks,
                       const std::vector<MlpParams>& surrogates,
                       const std::vector<MetaParams>& candidates, int threads,
                       const std::function<void(const HistoryRow&)>& on_step) {
  MetaParams theta = init;
  theta.learn_p = config.learn_p;
  Adam adam(theta.num_params(), AdamConfig{config.lr});
  TrainResult result;
  result.best = theta;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= config.steps; ++step) {
    const bool last = step == config.steps;
    const MetaEvaluation ev = meta_loss(theta, tasks, surrogates, config, !last, threads);
    if (ev.loss < result.best_loss) {
      result.best_loss = ev.loss;
      result.best = theta;
      result.best_step = step;
    }
    if (last) break;
    const HistoryRow row = history_row(step, ev.loss, theta);
    result.history.push_back(row);
    if (on_step) on_step(row);
    if (!meta_step(theta, ev.gradient, adam)) ++result.skipped_steps;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    MetaParams cand = candidates[i];
    cand.learn_p = config.learn_p;
    if (cand.num_params() != theta.num_params() || cand.p_init != config.p_init)
      throw std::invalid_argument("candidate parameters do not match the configuration");
    const MetaEvaluation ev = meta_loss(cand, tasks, surrogates, config, false, threads);
    if (ev.loss < result.best_loss) {
      result.best_loss = ev.loss;
      result.best = cand;
      result.best_step = -1 - static_cast<int>(i);
    }
  }
  return result;
}

TrainResult train(const MetaConfig& config, const std::vector<MetaTask>& tasks,
                  const std::vector<MlpParams>& surrogates,
                  const std::vector<MetaParams>& candidates, int threads,
                  const std::function<void(const HistoryRow&)>& on_step) {
  return train_from(init_meta_params(config), config, tasks, surrogates, candidates, threads,
                    on_step);
}

nlohmann::json checkpoint_json(const MetaParams& theta) {
  const Gains g = theta.gains();
  return {{"feature_net", to_json(theta.theta_y, theta.d)},
          {"d", theta.d},
          {"learn_p", theta.learn_p},
          {"p_init", theta.p_init},
          {"raw_p", theta.raw_p},
          {"p", theta.p()},
          {"epsilon", theta.epsilon},
          {"raw_lambda", to_std(theta.raw_lambda)},
          {"raw_k", to_std(theta.raw_k)},
          {"raw_P", to_std(theta.raw_gain_p)},
          {"lambda", to_std(g.lambda())},
          {"k", to_std(g.k())},
          {"P", to_std(g.p())}};
}

MetaParams checkpoint_from_json(const nlohmann::json& j) {
  try {
    MetaParams m;
    m.theta_y = mlp_from_json(j.at("feature_net"));
    m.d = j.at("d").get<int>();
    m.learn_p = j.at("learn_p").get<bool>();
    m.p_init = j.at("p_init").get<double>();
    m.raw_p = j.at("raw_p").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.raw_lambda = to_eigen(j.at("raw_lambda").get<std::vector<double>>());
    m.raw_k = to_eigen(j.at("raw_k").get<std::vector<double>>());
    m.raw_gain_p = to_eigen(j.at("raw_P").get<std::vector<double>>());
    if (m.raw_lambda.size() != 3 || m.raw_k.size() != 3 || m.raw_gain_p.size() != m.d ||
        m.theta_y.arch.output != 3 * m.d)
      throw ConfigError("checkpoint shapes are inconsistent");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint: ") + e.what());
  }
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  os << "step,meta_loss,decoded_p,min_gain,max_gain\n";
  for (const auto& r : rows) {
    os << r.step << ',' << fmt17(r.meta_loss) << ',' << fmt17(r.decoded_p) << ','
       << fmt17(r.min_gain) << ',' << fmt17(r.max_gain) << '\n';
  }
  return os.str();
}

}  // namespace mdac
