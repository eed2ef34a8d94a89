#include "mdac/simulate.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mdac/io.hpp"

namespace mdac {

void guard_divergence(const double* x, std::size_t n, double t) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || std::abs(x[i]) > kDivergenceLimit) throw RolloutDiverged(t);
  }
}

namespace {

struct Rhs {
  const ManipulatorModel& model;
  const DisturbanceFn& disturbance;
  const ControllerConfig& ctrl;
  const RefTrajectory& ref;
  Eigen::VectorXd lambda, p_diag;

  Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x,
                             Eigen::VectorXd* u_out = nullptr) const {
    const int n = model.n();
    const int d = ctrl.d;
    const Eigen::VectorXd q = x.segment(0, n);
    const Eigen::VectorXd qd = x.segment(n, n);
    const Eigen::VectorXd ahat = x.segment(2 * n, d);
    const RefSample r = ref.at(t);
    const Eigen::MatrixXd y_hat = ctrl.features(q, qd);
    const Eigen::VectorXd u = md_control(model, q, qd, r, ahat, ctrl.gains, y_hat);
    const Eigen::VectorXd f = disturbance(q, qd);
    const Sliding sl = sliding(q, qd, r, lambda);
    Eigen::VectorXd dx(x.size());
    dx.segment(0, n) = qd;
    dx.segment(n, n) = accel(model, q, qd, u, f);
    dx.segment(2 * n, d) = adaptation_rhs(ahat, sl.s, y_hat, p_diag, ctrl.pp);
    dx[2 * n + d] = sl.q_tilde.squaredNorm();
    dx[2 * n + d + 1] = u.squaredNorm();
    if (u_out != nullptr) *u_out = u;
    return dx;
  }
};

}  // namespace

Trajectory rollout(const ManipulatorModel& model, const DisturbanceFn& disturbance,
                   const ControllerConfig& controller, const RefTrajectory& ref,
                   double horizon, double dt, const Eigen::VectorXd& ahat0) {
  const int steps = steps_for(horizon, dt);
  const int n = model.n();
  const int d = controller.d;
  if (ahat0.size() != 0 && ahat0.size() != d)
    throw std::invalid_argument("initial estimate has the wrong length");
  validate(controller.pp);
  Rhs rhs{model, disturbance, controller, ref, controller.gains.lambda(),
          controller.gains.p()};

  const RefSample r0 = ref.at(0.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * n + d + 2);
  x.segment(0, n) = r0.q;
  x.segment(n, n) = r0.qd;
  if (ahat0.size() == d) x.segment(2 * n, d) = ahat0;

  Trajectory traj;
  traj.horizon = horizon;
  traj.dt = dt;
  auto record = [&](double t, const Eigen::VectorXd& state, const Eigen::VectorXd& u) {
    const RefSample r = ref.at(t);
    traj.t.push_back(t);
    traj.q.push_back(state.segment(0, n));
    traj.qd.push_back(state.segment(n, n));
    traj.ahat.push_back(state.segment(2 * n, d));
    traj.u.push_back(u);
    traj.q_r.push_back(r.q);
    traj.qd_r.push_back(r.qd);
  };

  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    Eigen::VectorXd u;
    const Eigen::VectorXd k1 = rhs(t, x, &u);
    record(t, x, u);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = rhs(t + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    guard_divergence(x.data(), static_cast<std::size_t>(x.size()), t + dt);
  }
  Eigen::VectorXd u;
  rhs(steps * dt, x, &u);
  record(steps * dt, x, u);
  traj.final_state = x;
  return traj;
}

double task_loss(const std::vector<Trajectory>& trajectories, double mu_ctrl) {
  if (trajectories.empty()) throw std::invalid_argument("task_loss needs >= 1 trajectory");
  double total = 0.0;
  for (const auto& tr : trajectories)
    total += (tr.loss_track() + mu_ctrl * tr.loss_ctrl()) / tr.horizon;
  return total / static_cast<double>(trajectories.size());
}

double rms(const Trajectory& traj) {
  const int n = traj.samples() - 1;
  if (n < 1) throw std::invalid_argument("rms needs at least two samples");
  double total = 0.0;
  for (int k = 1; k <= n; ++k) total += (traj.q[k] - traj.q_r[k]).squaredNorm();
  return total / n;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int d = traj.ahat.empty() ? 0 : static_cast<int>(traj.ahat.front().size());
  os << "t,x,y,phi,xdot,ydot,phidot,xr,yr,phir,xdr,ydr,phidr,u1,u2,u3";
  for (int k = 1; k <= d; ++k) os << ",ahat_" << k;
  os << '\n';
  for (int i = 0; i < traj.samples(); ++i) {
    os << fmt17(traj.t[i]);
    for (const auto* v :
         {&traj.q[i], &traj.qd[i], &traj.q_r[i], &traj.qd_r[i], &traj.u[i], &traj.ahat[i]}) {
      for (double x : *v) os << ',' << fmt17(x);
    }
    os << '\n';
  }
}

Trajectory read_trajectory_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int t_col = table.column("t");
  const int x_col = table.column("x");
  const int xd_col = table.column("xdot");
  const int xr_col = table.column("xr");
  const int xdr_col = table.column("xdr");
  const int u_col = table.column("u1");
  int d = 0;
  while (true) {
    bool found = false;
    for (const auto& h : table.header) found = found || h == "ahat_" + std::to_string(d + 1);
    if (!found) break;
    ++d;
  }
  const int a_col = d > 0 ? table.column("ahat_1") : 0;
  if (table.rows.size() < 2) throw ConfigError("trajectory " + path + " has < 2 samples");
  Trajectory traj;
  for (const auto& row : table.rows) {
    traj.t.push_back(row[t_col]);
    traj.q.push_back(Eigen::Vector3d(row[x_col], row[x_col + 1], row[x_col + 2]));
    traj.qd.push_back(Eigen::Vector3d(row[xd_col], row[xd_col + 1], row[xd_col + 2]));
    traj.q_r.push_back(Eigen::Vector3d(row[xr_col], row[xr_col + 1], row[xr_col + 2]));
    traj.qd_r.push_back(Eigen::Vector3d(row[xdr_col], row[xdr_col + 1], row[xdr_col + 2]));
    traj.u.push_back(Eigen::Vector3d(row[u_col], row[u_col + 1], row[u_col + 2]));
    Eigen::VectorXd a(d);
    for (int k = 0; k < d; ++k) a[k] = row[a_col + k];
    traj.ahat.push_back(a);
  }
  traj.dt = traj.t[1] - traj.t[0];
  traj.horizon = traj.t.back() - traj.t.front();
  return traj;
}

RefBlock ref_block(const std::vector<const RefTrajectory*>& refs, double t) {
  const int b = static_cast<int>(refs.size());
  RefBlock block{Eigen::VectorXd(3 * b), Eigen::VectorXd(3 * b), Eigen::VectorXd(3 * b)};
  for (int j = 0; j < b; ++j) {
    const RefSample r = refs[j]->at(t);
    for (int i = 0; i < 3; ++i) {
      block.q[i * b + j] = r.q[i];
      block.qd[i * b + j] = r.qd[i];
      block.qdd[i * b + j] = r.qdd[i];
    }
  }
  return block;
}

Eigen::VectorXd batch_initial_state(const std::vector<const RefTrajectory*>& refs, int d) {
  const int b = static_cast<int>(refs.size());
  const RefBlock r0 = ref_block(refs, 0.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6 * b + d * b + 2 * b);
  x.segment(0, 3 * b) = r0.q;
  x.segment(3 * b, 3 * b) = r0.qd;
  return x;
}

}  // namespace mdac
