#include "mdac/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/reference.hpp"
#include "mdac/simulate.hpp"

namespace mdac {

TrajectoryDataset collect_trajectory(const DisturbanceFn& disturbance,
                                     const RefTrajectory& ref, double horizon, double dt,
                                     const PidGains& pid) {
  const int steps = steps_for(horizon, dt);
  TrajectoryDataset data;
  data.dt = dt;
  const RefSample r0 = ref.at(0.0);
  Eigen::VectorXd q = r0.q;
  Eigen::VectorXd qd = r0.qd;
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(3);
  auto dist = [&](const Eigen::VectorXd& qq, const Eigen::VectorXd& vv) {
    return disturbance(qq, vv);
  };
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const RefSample r = ref.at(t);
    auto [u, next_integral] = pid_control(q, qd, r, pid, integral, dt);
    data.q.push_back(q);
    data.qd.push_back(qd);
    data.u.push_back(u);
    data.q_r.push_back(r.q);
    data.qd_r.push_back(r.qd);
    if (k == steps) break;
    const Eigen::VectorXd x = quad_step_zoh<Eigen::VectorXd>(q, qd, u, dist, dt, 1);
    guard_divergence(x.data(), static_cast<std::size_t>(x.size()), t + dt);
    q = x.segment(0, 3);
    qd = x.segment(3, 3);
    integral = next_integral;
  }
  return data;
}

TrajectoryDataset collect_trajectory(double w, std::uint64_t seed, double horizon, double dt,
                                     const PidGains& pid) {
  const auto ref = random_reference(seed, horizon);
  const WindDrag wd{w};
  TrajectoryDataset data = collect_trajectory(
      [wd](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) { return wind_drag(q, qd, wd); },
      *ref, horizon, dt, pid);
  data.w = w;
  data.seed = seed;
  return data;
}

namespace {

struct Batch {
  Eigen::VectorXd q, qd, u, target;  // 3 x B blocks; target is 6 x B
  int b = 0;
};

Batch make_batch(const TrajectoryDataset& data) {
  const int n = data.samples();
  if (n < 2) throw std::invalid_argument("dataset needs at least 2 samples");
  Batch batch;
  batch.b = n - 1;
  const int b = batch.b;
  batch.q.resize(3 * b);
  batch.qd.resize(3 * b);
  batch.u.resize(3 * b);
  batch.target.resize(6 * b);
  for (int k = 0; k < b; ++k) {
    for (int i = 0; i < 3; ++i) {
      batch.q[i * b + k] = data.q[k][i];
      batch.qd[i * b + k] = data.qd[k][i];
      batch.u[i * b + k] = data.u[k][i];
      batch.target[i * b + k] = data.q[k + 1][i];
      batch.target[(3 + i) * b + k] = data.qd[k + 1][i];
    }
  }
  return batch;
}

template <class V>
V one_step_loss_impl(const V& flat, const Architecture& arch, const Batch& batch,
                     double dt) {
  const int b = batch.b;
  auto fhat = [&](const V& q, const V& qd) {
    return mlp_forward(flat, 0, arch, V(cat(q, qd)), b);
  };
  const V q = lift(flat, batch.q);
  const V qd = lift(flat, batch.qd);
  const V u = lift(flat, batch.u);
  const V pred = quad_step_zoh(q, qd, u, fhat, dt, b);
  const V err = pred - batch.target;
  return (1.0 / b) * sum(emul(err, err));
}

}  // namespace

double one_step_loss(const MlpParams& xi, const TrajectoryDataset& data) {
  const Batch batch = make_batch(data);
  const Eigen::VectorXd flat = xi.flatten();
  return one_step_loss_impl<Eigen::VectorXd>(flat, xi.arch, batch, data.dt)[0];
}

ad::Var one_step_loss_tape(const ad::Var& flat, const Architecture& arch,
                           const TrajectoryDataset& data) {
  return one_step_loss_impl<ad::Var>(flat, arch, make_batch(data), data.dt);
}

SurrogateFit fit_surrogate(const TrajectoryDataset& data, std::uint64_t seed,
                           const EnsembleConfig& config) {
  const Architecture arch = surrogate_architecture(config.hidden);
  const Batch batch = make_batch(data);
  MlpParams init = init_mlp(seed, arch);
  Eigen::VectorXd theta = init.flatten();
  Adam adam(theta.size(), config.adam);

  SurrogateFit fit;
  fit.zero_network_loss = one_step_loss_impl<Eigen::VectorXd>(
      Eigen::VectorXd::Zero(theta.size()), arch, batch, data.dt)[0];
  fit.best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best = theta;
  // The loss graph has no value-dependent branches, so one recording is
  // replayed with new parameters at every step.
  ad::Tape tape;
  const ad::Var x = tape.leaf(theta);
  const ad::Var loss = one_step_loss_impl<ad::Var>(x, arch, batch, data.dt);
  for (int step = 0; step <= config.steps; ++step) {
    if (step > 0) tape.replay({theta});
    const double value = loss.scalar();
    if (!std::isfinite(value))
      throw NumericalError("surrogate fit: non-finite loss at step " + std::to_string(step));
    if (step == 0) fit.initial_loss = value;
    fit.history.push_back(value);
    if (value < fit.best_loss) {
      fit.best_loss = value;
      best = theta;
    }
    if (step == config.steps) break;
    tape.backward(loss);
    auto g = tape.adjoint(x.id());
    adam.step(theta, Eigen::Map<const Eigen::VectorXd>(g.data(), theta.size()));
  }
  fit.params = MlpParams::unflatten(arch, best, seed);
  return fit;
}

void write_dataset_csv(const std::string& path, const TrajectoryDataset& data) {
  Trajectory traj;
  for (int k = 0; k < data.samples(); ++k) {
    traj.t.push_back(k * data.dt);
    traj.q.push_back(data.q[k]);
    traj.qd.push_back(data.qd[k]);
    traj.u.push_back(data.u[k]);
    traj.q_r.push_back(data.q_r.empty() ? Eigen::VectorXd::Zero(3) : data.q_r[k]);
    traj.qd_r.push_back(data.qd_r.empty() ? Eigen::VectorXd::Zero(3) : data.qd_r[k]);
    traj.ahat.push_back(Eigen::VectorXd());
  }
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  write_text_file(path, os.str());
}

TrajectoryDataset read_dataset_csv(const std::string& path) {
  const Trajectory traj = read_trajectory_csv(path);
  TrajectoryDataset data;
  data.q = traj.q;
  data.qd = traj.qd;
  data.u = traj.u;
  data.q_r = traj.q_r;
  data.qd_r = traj.qd_r;
  data.dt = traj.dt;
  return data;
}

}  // namespace mdac
